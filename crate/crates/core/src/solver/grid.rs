//! Exhaustive search over `sigma` for `m_x <= 2`, used as a reference.
//!
//! `sigma = S R(theta) diag(d1, d2) R(theta)^T S` with `S = sigma_x^{1/2}`,
//! `d` log-spaced in `[1e-10, 1]` and `theta` uniform in `[0, pi)`. The
//! boundary is the concave majorant of the sampled rate pairs.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::whiten::Whitened;
use crate::channel::InfoForm;
use crate::error::{Error, Result};
use crate::model::{GeneralModel, Model};
use crate::rates::{asymptotic_limit, RatePair};
use crate::region::{check_rp_grid, finalize, PointMeta, PointStatus, RegionBoundary};

const D_FLOOR: f64 = 1e-10;

fn d_values(n: usize) -> Vec<f64> {
    let lf = D_FLOOR.log10();
    (0..n).map(|k| 10f64.powf(lf * (1.0 - k as f64 / (n - 1) as f64))).collect()
}

type Cand = (f64, f64, usize, f64, f64);

/// Upper concave majorant of `(ip, ik)` points, truncated at its highest
/// key rate. Vertices come back sorted by `ip`.
fn upper_hull(mut pts: Vec<Cand>) -> Vec<Cand> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut hull: Vec<Cand> = Vec::new();
    for p in pts {
        if hull.last().is_some_and(|h| p.1 <= h.1) {
            // a cheaper point already reaches this key rate
            continue;
        }
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b when it lies on or below the chord a-p
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Boundary on `rp_grid` from a `density`-per-axis grid.
///
/// Time sharing makes the region convex, so the key rate at `rp` is read off
/// the concave majorant of the sampled rate pairs. `sigma_star` is the grid
/// point at the left end of the majorant segment containing `rp`.
pub fn brute_force_grid(m: &GeneralModel, rp_grid: &[f64], density: usize) -> Result<RegionBoundary> {
    if m.m_x() > 2 {
        return Err(Error::DimensionTooLarge(m.m_x()));
    }
    check_rp_grid(rp_grid)?;
    let n = density.max(2);
    let w = Whitened::new(&InfoForm::from(m));
    let ds = d_values(n);
    let dim = m.m_x();
    let thetas = if dim == 1 { 1 } else { n };
    let candidate = |k: usize, d1: f64, d2: f64| -> DMatrix<f64> {
        if dim == 1 {
            return DMatrix::from_element(1, 1, d1);
        }
        let th = std::f64::consts::PI * k as f64 / n as f64;
        let (c, s) = (th.cos(), th.sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        &r * DMatrix::from_diagonal(&DVector::from_vec(vec![d1, d2])) * r.transpose()
    };
    // D = I is always feasible with I_k = 0
    let origin: Cand = (0.0, 0.0, usize::MAX, 1.0, 1.0);
    let per_angle: Vec<Vec<Cand>> = (0..thetas)
        .into_par_iter()
        .map(|k| {
            let second: &[f64] = if dim == 1 { &ds[ds.len() - 1..] } else { &ds };
            let mut pts = vec![origin];
            for &d1 in &ds {
                for &d2 in second {
                    if let Some((ip, ik)) = w.rates(&candidate(k, d1, d2)) {
                        pts.push((ip, ik, k, d1, d2));
                    }
                }
            }
            upper_hull(pts)
        })
        .collect();
    let hull = upper_hull(per_angle.into_iter().flatten().collect());

    let mut points = Vec::with_capacity(rp_grid.len());
    let mut meta = Vec::with_capacity(rp_grid.len());
    for &rp in rp_grid {
        let i = hull.partition_point(|v| v.0 <= rp).saturating_sub(1);
        let v = hull[i];
        let rk = match hull.get(i + 1) {
            Some(u) if v.0 <= rp => v.1 + (u.1 - v.1) * (rp - v.0) / (u.0 - v.0),
            _ => v.1,
        };
        let d = if v.2 == usize::MAX { DMatrix::identity(dim, dim) } else { candidate(v.2, v.3, v.4) };
        points.push(RatePair { rp, rk });
        meta.push(PointMeta {
            s: None,
            t: None,
            kkt_residual: 0.0,
            status: PointStatus::Sampled,
            sigma_star: w.unwhiten(&d),
            ip: v.0,
            ik: v.1,
        });
    }
    finalize(&mut points, &mut meta);
    Ok(RegionBoundary {
        points,
        model_digest: Model::from(m.clone()).digest(),
        solver_meta: meta,
        asymptotic_limit: asymptotic_limit(m),
        failures: vec![],
    })
}
