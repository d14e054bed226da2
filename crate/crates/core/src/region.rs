//! Computed boundaries of the achievable `(R_p, R_k)` region and membership.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::GeneralModel;
use crate::rates::{asymptotic_limit, RatePair};
use crate::solver::{ascent_boundary_general, sweep_boundary_with, AscentConfig, SweepConfig};

/// How a boundary point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    /// Rate constraint resolved by the solver; the point is a KKT candidate.
    Converged,
    /// Key rate equals the closed-form `R_p -> inf` limit to within the
    /// saturation tolerance. The optimizer is then nearly singular and the
    /// multipliers vanish, so the upper bound certifies optimality instead.
    Saturated,
    /// Solver did not converge; the value is a feasible lower bound only.
    Unconverged,
    /// Read off the concave majorant of an exhaustive parameter grid.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeta {
    /// `(s, t)` of the inner problem, when the point came from the sweep.
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub kkt_residual: f64,
    pub status: PointStatus,
    /// Optimal conditional covariance.
    pub sigma_star: SymMatrix,
    /// `I_p` and raw `I_k` actually achieved by `sigma_star`.
    pub ip: f64,
    pub ik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    /// Sorted by `rp`; `rk` clamped at 0 and nondecreasing.
    pub points: Vec<RatePair>,
    pub model_digest: String,
    /// One entry per point.
    pub solver_meta: Vec<PointMeta>,
    pub asymptotic_limit: f64,
    /// Grid values whose solve failed, with the reason; excluded from `points`.
    pub failures: Vec<(f64, String)>,
}

impl RegionBoundary {
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].rk >= w[0].rk && w[1].rp >= w[0].rp)
    }

    /// Boundary value at an exact grid `rp`.
    pub fn rk_at(&self, rp: f64) -> Option<f64> {
        self.points.iter().find(|p| p.rp == rp).map(|p| p.rk)
    }
}

pub(crate) fn check_rp_grid(rp_grid: &[f64]) -> Result<()> {
    if rp_grid.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InvalidArgument("rp grid must be finite and nonnegative".into()));
    }
    if rp_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("rp grid must be sorted ascending".into()));
    }
    Ok(())
}

/// Clamps at zero and enforces a nondecreasing boundary. A point that falls
/// visibly below its predecessor inherits the predecessor's optimizer, which
/// is still feasible at the larger `rp`; round-off dips only lift `rk`.
pub(crate) fn finalize(points: &mut [RatePair], meta: &mut [PointMeta]) {
    for p in points.iter_mut() {
        p.rk = p.rk.max(0.0);
    }
    for i in 1..points.len() {
        if points[i].rk < points[i - 1].rk {
            let drop = points[i - 1].rk - points[i].rk;
            points[i].rk = points[i - 1].rk;
            if drop <= 1e-9 * (1.0 + points[i].rk) {
                continue;
            }
            let prev = meta[i - 1].clone();
            meta[i] = PointMeta {
                status: match prev.status {
                    PointStatus::Converged => PointStatus::Unconverged,
                    other => other,
                },
                ..prev
            };
        }
    }
}

/// Whether `p` lies in the region of `m`, up to `tol` on the key rate.
///
/// Uses the `(s, t)` sweep for single-output models and the multi-start
/// ascent otherwise.
pub fn contains(m: &GeneralModel, p: RatePair, tol: f64) -> Result<bool> {
    if !(p.rp >= 0.0) {
        return Ok(false);
    }
    if p.rk <= tol {
        return Ok(true);
    }
    if p.rk > asymptotic_limit(m) + tol {
        return Ok(false);
    }
    let boundary = if m.m_y() == 1 && m.m_z() == 1 {
        sweep_boundary_with(m, &[p.rp], &SweepConfig::coarse())?
    } else {
        ascent_boundary_general(m, &[p.rp], &AscentConfig::default())?
    };
    match boundary.points.first() {
        Some(b) => Ok(b.rk >= p.rk - tol),
        None => Err(Error::SolverFailure(
            boundary.failures.first().map(|f| f.1.clone()).unwrap_or_default(),
        )),
    }
}
