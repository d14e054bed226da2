//! Boundary of a single-output model by sweeping the `(s, t)` plane.
//!
//! For a target `t` the smallest privacy leakage over `s` is `P(t)`; the
//! boundary at `rp` is `I_k(t*)` with `t*` the largest `t` where
//! `P(t) <= rp`. A log-spaced grid brackets `t*`, which is then refined by
//! bisection in `t` with a golden-section search over `log s`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::ascent::{refine, AscentConfig};
use super::inner::{solve_cell, CellSolution, InnerConfig, Scalarized, SweepParams};
use crate::error::Result;
use crate::model::{GeneralModel, Model};
use crate::rates::{asymptotic_limit, RatePair};
use crate::region::{check_rp_grid, finalize, PointMeta, PointStatus, RegionBoundary};

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub s_points: usize,
    pub t_points: usize,
    /// Smallest grid gap to the ends of the `s` and `t` ranges, relative to
    /// the range length.
    pub s_floor: f64,
    pub t_floor: f64,
    pub refine: bool,
    pub bisection_steps: usize,
    pub golden_steps: usize,
    /// Distance to the asymptotic limit under which a point is reported as
    /// saturated.
    pub saturation_tol: f64,
    pub inner: InnerConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            s_points: 200,
            t_points: 200,
            s_floor: 1e-10,
            t_floor: 1e-9,
            refine: true,
            bisection_steps: 80,
            golden_steps: 60,
            saturation_tol: 1e-9,
            inner: InnerConfig::default(),
        }
    }
}

impl SweepConfig {
    /// Square `n x n` grid with default refinement.
    pub fn with_resolution(n: usize) -> Self {
        Self { s_points: n.max(2), t_points: n.max(2), ..Self::default() }
    }

    /// Cheap grid for single membership queries.
    pub fn coarse() -> Self {
        Self::with_resolution(40)
    }
}

/// Log-spaced points from `hi - range` toward `hi`, gap shrinking to
/// `floor * range`. The first point is `hi - range`.
fn approach(hi: f64, range: f64, floor: f64, n: usize) -> Vec<f64> {
    let lf = floor.log10();
    (0..n)
        .map(|j| {
            let frac = if n == 1 { 0.0 } else { j as f64 / (n - 1) as f64 };
            hi - range * 10f64.powf(lf * frac)
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Best {
    t: f64,
    s: f64,
    cell: CellSolution,
}

struct Ctx<'a> {
    sc: &'a Scalarized,
    cfg: &'a SweepConfig,
    s_grid: Vec<f64>,
}

impl Ctx<'_> {
    fn cell(&self, s: f64, t: f64) -> Option<CellSolution> {
        let p = SweepParams { s, t };
        solve_cell(self.sc, p, &self.cfg.inner).ok().filter(|c| c.value.is_finite())
    }

    /// Golden-section minimization of `P(t, s)` over `log s` in `[a, b]`.
    /// Stops early once a value at or below `target` is seen.
    fn min_over_s(&self, t: f64, mut a: f64, mut b: f64, target: f64) -> Option<(f64, CellSolution)> {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut best: Option<(f64, CellSolution)> = None;
        let eval = |ls: f64, best: &mut Option<(f64, CellSolution)>| -> f64 {
            let s = ls.exp();
            match self.cell(s, t) {
                Some(c) => {
                    let v = c.value;
                    if best.as_ref().is_none_or(|b| v < b.1.value) {
                        *best = Some((s, c));
                    }
                    v
                }
                None => f64::INFINITY,
            }
        };
        let fa = eval(a, &mut best);
        let fb = eval(b, &mut best);
        if fa.min(fb) <= target {
            return best;
        }
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = eval(c, &mut best);
        let mut fd = eval(d, &mut best);
        for _ in 0..self.cfg.golden_steps {
            if fc.min(fd) <= target || (b - a) < 1e-5 {
                break;
            }
            // infeasible cells sit on the small-s side, so ties move right
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = eval(c, &mut best);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = eval(d, &mut best);
            }
        }
        best
    }
}

/// Boundary of `m` (requires `m_y = m_z = 1`) on an ascending `rp_grid`,
/// with an `st_resolution x st_resolution` grid.
pub fn sweep_boundary(m: &GeneralModel, rp_grid: &[f64], st_resolution: usize) -> Result<RegionBoundary> {
    sweep_boundary_with(m, rp_grid, &SweepConfig::with_resolution(st_resolution))
}

pub fn sweep_boundary_with(m: &GeneralModel, rp_grid: &[f64], cfg: &SweepConfig) -> Result<RegionBoundary> {
    check_rp_grid(rp_grid)?;
    let sc = Scalarized::new(m)?;
    let limit = asymptotic_limit(m);
    let digest = Model::from(m.clone()).digest();
    let dim = sc.w.m;
    let identity = DMatrix::<f64>::identity(dim, dim);
    let t_x = (sc.ee - sc.bb) / (sc.bb + 1.0);
    let t_max = (2.0 * limit).exp() * (1.0 + sc.ee) / (1.0 + sc.bb) - 1.0;
    let range = t_max - t_x;

    let corner = Best {
        t: t_x,
        s: sc.bb,
        cell: CellSolution { d: identity.clone(), value: 0.0, iterations: 0, residual: 0.0, converged: true },
    };

    let ctx = Ctx {
        sc: &sc,
        cfg,
        s_grid: {
            let mut g = approach(sc.bb, sc.bb, cfg.s_floor, cfg.s_points);
            g.reverse();
            g
        },
    };

    let degenerate = range <= 1e-12 * (1.0 + t_x.abs());
    let results: Vec<Best> = if degenerate {
        // no t beyond t(sigma_x): sigma_x is optimal at every rp
        rp_grid.iter().map(|_| corner.clone()).collect()
    } else {
        let t_grid = approach(t_max, range, cfg.t_floor, cfg.t_points);
        let ns = ctx.s_grid.len();
        // the feasible set shrinks as t grows, so a column stops at its first
        // infeasible cell
        let columns: Vec<Vec<Option<CellSolution>>> = ctx
            .s_grid
            .par_iter()
            .map(|&s| {
                let mut col = Vec::with_capacity(t_grid.len());
                for &t in &t_grid {
                    let c = ctx.cell(s, t);
                    let stop = c.is_none();
                    col.push(c);
                    if stop {
                        break;
                    }
                }
                col.resize(t_grid.len(), None);
                col
            })
            .collect();
        let cells: Vec<Option<CellSolution>> =
            (0..t_grid.len() * ns).map(|k| columns[k % ns][k / ns].clone()).collect();
        // per-row minimum over s: (value, s index)
        let rows: Vec<Option<(f64, usize)>> = (0..t_grid.len())
            .map(|j| {
                let mut best: Option<(f64, usize)> = None;
                for i in 0..ns {
                    if let Some(c) = &cells[j * ns + i] {
                        if best.is_none_or(|b| c.value < b.0) {
                            best = Some((c.value, i));
                        }
                    }
                }
                best
            })
            .collect();

        rp_grid
            .par_iter()
            .map(|&rp| {
                let feasible = (0..t_grid.len()).rev().find(|&j| rows[j].is_some_and(|r| r.0 <= rp));
                let mut best = match feasible {
                    Some(j) => {
                        let i = rows[j].unwrap().1;
                        Best { t: t_grid[j], s: ctx.s_grid[i], cell: cells[j * ns + i].clone().unwrap() }
                    }
                    None => corner.clone(),
                };
                // row 0 sits at t(sigma_x), reached exactly only by the corner
                let next = match feasible {
                    Some(j) => (j + 1 < t_grid.len()).then_some(j + 1),
                    None => Some(1),
                };
                let mut hi = next.map_or(t_max, |j| t_grid[j]);
                if !cfg.refine {
                    return best;
                }
                // log s bracket from the neighbouring rows' minimizers
                let idx: Vec<usize> = [feasible, next]
                    .iter()
                    .flatten()
                    .filter_map(|&j| rows[j].map(|r| r.1))
                    .collect();
                let (i_lo, i_hi) = if idx.is_empty() {
                    (0, ns - 1)
                } else {
                    let lo = *idx.iter().min().unwrap();
                    let hi = *idx.iter().max().unwrap();
                    (lo.saturating_sub(3), (hi + 3).min(ns - 1))
                };
                let (mut la, mut lb) = (ctx.s_grid[i_lo].ln(), ctx.s_grid[i_hi].ln());
                if feasible.is_none() {
                    // near the corner the optimal s tends to b S_x b^T
                    lb = sc.bb.ln();
                    la = la.min(lb - 1.0);
                }
                for _ in 0..cfg.bisection_steps {
                    if hi - best.t <= 1e-10 * (1.0 + best.t.abs()) {
                        break;
                    }
                    let mid = 0.5 * (best.t + hi);
                    match ctx.min_over_s(mid, la, lb, rp) {
                        Some((s, c)) if c.value <= rp => best = Best { t: mid, s, cell: c },
                        _ => hi = mid,
                    }
                }
                best
            })
            .collect()
    };
    // polish on the original problem so the optimizer meets the optimality
    // conditions to solver precision
    let acfg = AscentConfig::default();
    let polished: Vec<(Best, f64, f64)> = results
        .into_par_iter()
        .zip(rp_grid.par_iter())
        .map(|(mut best, &rp)| {
            let (mut ip, mut ik) = sc.w.rates(&best.cell.d).unwrap_or((f64::NAN, f64::NAN));
            if !degenerate && rp > 0.0 {
                if let Some((p, pip, pik)) = refine(&sc.w, &best.cell.d, rp, &acfg) {
                    if pik >= ik - 1e-10 {
                        best.cell.d = p.d;
                        best.cell.residual = p.residual;
                        best.cell.converged = p.converged;
                        (ip, ik) = (pip, pik);
                    }
                }
            }
            (best, ip, ik)
        })
        .collect();
    let mut points = Vec::with_capacity(rp_grid.len());
    let mut meta = Vec::with_capacity(rp_grid.len());
    for (&rp, (best, ip, ik)) in rp_grid.iter().zip(polished) {
        let rk = ik.max(0.0);
        let status = if degenerate {
            PointStatus::Converged
        } else if limit - rk <= cfg.saturation_tol {
            PointStatus::Saturated
        } else if best.cell.converged {
            PointStatus::Converged
        } else {
            PointStatus::Unconverged
        };
        points.push(RatePair { rp, rk });
        meta.push(PointMeta {
            s: Some(best.s),
            t: Some(best.t),
            kkt_residual: best.cell.residual,
            status,
            sigma_star: sc.w.unwhiten(&best.cell.d),
            ip,
            ik,
        });
    }
    finalize(&mut points, &mut meta);
    Ok(RegionBoundary { points, model_digest: digest, solver_meta: meta, asymptotic_limit: limit, failures: vec![] })
}

