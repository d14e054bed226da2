//! The per-`(s, t)` convex problem for single-output observations:
//!
//! ```text
//! maximize   log|sigma|
//! subject to t (b sigma b^T + 1) <= e sigma e^T - b sigma b^T
//!            b sigma b^T <= s
//!            0 < sigma <= sigma_x
//! ```
//!
//! Its optimum minimizes
//! `I_p(sigma, s) = 1/2 log|sigma_x / sigma| - 1/2 log(b sigma_x b^T + 1) + 1/2 log(1 + s)`. Solved by a log-barrier
//! Newton method with a phase-I search for a strictly feasible start.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::newton::{minimize, Objective, BARRIER_RELAXED_TOL};
use super::whiten::Whitened;
use crate::channel::InfoForm;
use crate::error::{Error, Result};
use crate::linalg::log_det_ratio;
use crate::model::{ConditionalCov, GeneralModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub s: f64,
    pub t: f64,
}

impl SweepParams {
    pub fn new(s: f64, t: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("s must be >= 0, got {s}")));
        }
        if !(t >= -1.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("t must be >= -1, got {t}")));
        }
        Ok(Self { s, t })
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub optimum: ConditionalCov,
    pub value: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct InnerConfig {
    /// Barrier stops once the duality-gap proxy `theta / tau` drops below this.
    pub gap_tol: f64,
    pub residual_tol: f64,
    pub max_newton: usize,
    /// Newton budget of one barrier stage.
    pub max_stage: usize,
    /// Newton budget of the phase-I search; cells that need more are
    /// reported infeasible.
    pub max_phase_one: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self { gap_tol: 1e-8, residual_tol: 1e-6, max_newton: 4000, max_stage: 150, max_phase_one: 300 }
    }
}

/// Result of one cell in whitened coordinates.
#[derive(Debug, Clone)]
pub(crate) struct CellSolution {
    pub d: DMatrix<f64>,
    /// `I_p(sigma, s)`.
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Precomputed single-output geometry.
#[derive(Debug, Clone)]
pub(crate) struct Scalarized {
    pub w: Whitened,
    /// `b~^T b~`, `e~^T e~` with `b~ = b S`.
    pub pb: DMatrix<f64>,
    pub pe: DMatrix<f64>,
    /// `|b~|^2 = b sigma_x b^T`.
    pub bb: f64,
    pub ee: f64,
}

impl Scalarized {
    pub fn new(m: &GeneralModel) -> Result<Self> {
        if m.m_y() != 1 || m.m_z() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "(s, t) sweep needs single-output observations, got m_y = {}, m_z = {}",
                m.m_y(),
                m.m_z()
            )));
        }
        let w = Whitened::new(&InfoForm::from(m));
        let pb = w.fy.transpose() * &w.fy;
        let pe = w.fz.transpose() * &w.fz;
        let bb = pb.trace();
        let ee = pe.trace();
        Ok(Self { w, pb, pe, bb, ee })
    }

    /// `I_p(sigma, s)` for whitened `d`.
    pub fn ip_relaxed(&self, d: &DMatrix<f64>, s: f64) -> Option<f64> {
        let ld = crate::linalg::log_det_spd(d)?;
        Some(-0.5 * ld - 0.5 * (1.0 + self.bb).ln() + 0.5 * (1.0 + s).ln())
    }

    fn slacks(&self, d: &DMatrix<f64>, p: SweepParams) -> (f64, f64) {
        let x = self.pb.dot(d);
        let y = self.pe.dot(d);
        (p.s - x, y - x - p.t * (x + 1.0))
    }

    fn k_matrix(&self, t: f64) -> DMatrix<f64> {
        &self.pe - &self.pb * (1.0 + t)
    }
}

struct CellBarrier<'a> {
    sc: &'a Scalarized,
    tau: f64,
    gb: DVector<f64>,
    gk: DVector<f64>,
    p: SweepParams,
}

impl Objective for CellBarrier<'_> {
    fn eval(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let d = self.sc.w.basis.to_matrix(x);
        let (l1, l2) = self.sc.slacks(&d, self.p);
        if l1 <= 0.0 || l2 <= 0.0 {
            return None;
        }
        let ld = self.sc.w.log_det(&d)?;
        let lc = self.sc.w.log_det_complement(&d)?;
        let k = self.tau + 1.0;
        let value = -k * ld.value - lc.value - l1.ln() - l2.ln();
        let grad = -&ld.grad * k - &lc.grad + &self.gb / l1 - &self.gk / l2;
        let hess = -&ld.hess * k - &lc.hess
            + &self.gb * self.gb.transpose() / (l1 * l1)
            + &self.gk * self.gk.transpose() / (l2 * l2);
        Some((value, grad, hess))
    }

    fn delta(&self, x: &DVector<f64>, dx: &DVector<f64>, step: f64) -> Option<f64> {
        let basis = &self.sc.w.basis;
        let (d, dd) = (basis.to_matrix(x), basis.to_matrix(dx));
        let (l1, l2) = self.sc.slacks(&d, self.p);
        let (g1, g2) = (-self.gb.dot(dx), self.gk.dot(dx));
        let ld = log_det_ratio(&d, &dd, step)?;
        let lc = log_det_ratio(&(DMatrix::identity(d.nrows(), d.nrows()) - &d), &(-dd), step)?;
        Some(-(self.tau + 1.0) * ld - lc - log_ratio(l1, g1, step)? - log_ratio(l2, g2, step)?)
    }

    fn relaxed_tol(&self) -> f64 {
        BARRIER_RELAXED_TOL
    }

    fn precondition(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let basis = &self.sc.w.basis;
        Some(basis.interval_scaling(&basis.to_matrix(x)))
    }
}

/// `log(l + step g) - log(l)` for a positive slack `l`.
fn log_ratio(l: f64, g: f64, step: f64) -> Option<f64> {
    let r = step * g / l;
    (r > -1.0).then(|| r.ln_1p())
}

struct PhaseOne<'a> {
    sc: &'a Scalarized,
    tau: f64,
    gb: DVector<f64>,
    gk: DVector<f64>,
    p: SweepParams,
}

impl Objective for PhaseOne<'_> {
    fn eval(&self, z: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = z.len() - 1;
        let x = z.rows(0, n).into_owned();
        let r = z[n];
        let d = self.sc.w.basis.to_matrix(&x);
        let (l1, l2) = self.sc.slacks(&d, self.p);
        let (a1, a2) = (l1 + r, l2 + r);
        if a1 <= 0.0 || a2 <= 0.0 {
            return None;
        }
        let ld = self.sc.w.log_det(&d)?;
        let lc = self.sc.w.log_det_complement(&d)?;
        let value = self.tau * r - ld.value - lc.value - a1.ln() - a2.ln();
        let mut grad = DVector::zeros(n + 1);
        let gx = -&ld.grad - &lc.grad + &self.gb / a1 - &self.gk / a2;
        grad.rows_mut(0, n).copy_from(&gx);
        grad[n] = self.tau - 1.0 / a1 - 1.0 / a2;
        let mut hess = DMatrix::zeros(n + 1, n + 1);
        // slack derivatives: d a1 = -gb, d a2 = gk, both +1 in r
        let mut v1 = DVector::zeros(n + 1);
        v1.rows_mut(0, n).copy_from(&(-&self.gb));
        v1[n] = 1.0;
        let mut v2 = DVector::zeros(n + 1);
        v2.rows_mut(0, n).copy_from(&self.gk);
        v2[n] = 1.0;
        let hx = -&ld.hess - &lc.hess;
        hess.view_mut((0, 0), (n, n)).copy_from(&hx);
        hess += &v1 * v1.transpose() / (a1 * a1) + &v2 * v2.transpose() / (a2 * a2);
        Some((value, grad, hess))
    }

    fn delta(&self, z: &DVector<f64>, dz: &DVector<f64>, step: f64) -> Option<f64> {
        let basis = &self.sc.w.basis;
        let n = z.len() - 1;
        let d = basis.to_matrix(&z.rows(0, n).into_owned());
        let dd = basis.to_matrix(&dz.rows(0, n).into_owned());
        let dxv = dz.rows(0, n).into_owned();
        let (l1, l2) = self.sc.slacks(&d, self.p);
        let (a1, a2) = (l1 + z[n], l2 + z[n]);
        let (g1, g2) = (-self.gb.dot(&dxv) + dz[n], self.gk.dot(&dxv) + dz[n]);
        let ld = log_det_ratio(&d, &dd, step)?;
        let lc = log_det_ratio(&(DMatrix::identity(d.nrows(), d.nrows()) - &d), &(-dd), step)?;
        Some(self.tau * step * dz[n] - ld - lc - log_ratio(a1, g1, step)? - log_ratio(a2, g2, step)?)
    }

    fn relaxed_tol(&self) -> f64 {
        BARRIER_RELAXED_TOL
    }

    fn precondition(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let basis = &self.sc.w.basis;
        let n = z.len() - 1;
        let d = basis.to_matrix(&z.rows(0, n).into_owned());
        let mut t = DMatrix::identity(n + 1, n + 1);
        t.view_mut((0, 0), (n, n)).copy_from(&basis.interval_scaling(&d));
        Some(t)
    }
}

fn strictly_feasible(sc: &Scalarized, d: &DMatrix<f64>, p: SweepParams) -> bool {
    let (l1, l2) = sc.slacks(d, p);
    l1 > 0.0
        && l2 > 0.0
        && crate::linalg::log_det_spd(d).is_some()
        && crate::linalg::log_det_spd(&(DMatrix::identity(sc.w.m, sc.w.m) - d)).is_some()
}

/// `max <K(t), D>` over `0 <= D <= I` with `<pb, D> <= s`, by its dual
/// `min_{lambda >= 0} sum_i max(0, eig_i(K - lambda pb)) + lambda s`.
/// The cell is strictly feasible iff this exceeds `t`.
fn key_margin(sc: &Scalarized, p: SweepParams) -> f64 {
    let k = sc.k_matrix(p.t);
    let h = |lam: f64| -> f64 {
        let vals = crate::linalg::sym_eigen(&(&k - &sc.pb * lam)).0;
        vals.iter().map(|v| v.max(0.0)).sum::<f64>() + lam * p.s
    };
    let mut hi = 1.0;
    while h(2.0 * hi) < h(hi) && hi < 1e15 {
        hi *= 2.0;
    }
    hi *= 2.0;
    let (mut a, mut b) = (0.0, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    for _ in 0..120 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = h(d);
        }
    }
    h(0.0).min(fc).min(fd)
}

fn phase_one(sc: &Scalarized, p: SweepParams, cfg: &InnerConfig) -> Result<(DMatrix<f64>, usize)> {
    if key_margin(sc, p) <= p.t + 1e-12 * (1.0 + p.t.abs()) {
        return Err(Error::Infeasible { s: p.s, t: p.t });
    }
    let m = sc.w.m;
    let id = DMatrix::<f64>::identity(m, m);
    for c in [1.0 - 1e-6, 0.5, 1e-3] {
        let d = &id * c;
        if strictly_feasible(sc, &d, p) {
            return Ok((d, 0));
        }
    }
    let basis = &sc.w.basis;
    let n = basis.n();
    let d0 = &id * 0.5;
    let (l1, l2) = sc.slacks(&d0, p);
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(&basis.to_coords(&d0));
    z[n] = (-l1).max(-l2).max(0.0) + 1.0;
    let gb = basis.grad(&sc.pb);
    let gk = basis.grad(&sc.k_matrix(p.t));
    let theta = (2 * m + 2) as f64;
    let mut tau = 1.0;
    let mut iterations = 0;
    loop {
        let obj = PhaseOne { sc, tau, gb: gb.clone(), gk: gk.clone(), p };
        let out = minimize(&obj, z, 1e-12, cfg.max_phase_one, |z| z[n] < 0.0);
        iterations += out.iterations;
        z = out.x;
        if z[n] < 0.0 {
            let d = basis.to_matrix(&z.rows(0, n).into_owned());
            if strictly_feasible(sc, &d, p) {
                return Ok((d, iterations));
            }
        }
        if theta / tau < 1e-13 || iterations > cfg.max_phase_one {
            // feasible by the dual bound but too thin to enter within budget
            return Err(Error::Infeasible { s: p.s, t: p.t });
        }
        tau *= 10.0;
    }
}

pub(crate) fn solve_cell(sc: &Scalarized, p: SweepParams, cfg: &InnerConfig) -> Result<CellSolution> {
    let (d0, mut iterations) = phase_one(sc, p, cfg)?;
    let basis = &sc.w.basis;
    let m = sc.w.m;
    let gb = basis.grad(&sc.pb);
    let gk = basis.grad(&sc.k_matrix(p.t));
    let theta = (2 * m + 2) as f64;
    let mut x = basis.to_coords(&d0);
    let mut tau = 1.0;
    let mut all_converged = true;
    let mut residual = f64::INFINITY;
    loop {
        let obj = CellBarrier { sc, tau, gb: gb.clone(), gk: gk.clone(), p };
        let out = minimize(&obj, x, 1e-13, cfg.max_stage, |_| false);
        iterations += out.iterations;
        x = out.x;
        if !out.converged {
            // ill-conditioned stage: keep the feasible iterate, whose accuracy
            // is that of the last completed stage
            all_converged = false;
            break;
        }
        residual = theta / tau;
        if residual < cfg.gap_tol {
            break;
        }
        if iterations > cfg.max_newton {
            return Err(Error::MaxIterationsExceeded(cfg.max_newton));
        }
        tau *= 10.0;
    }
    let d = basis.to_matrix(&x);
    let value = sc.ip_relaxed(&d, p.s).ok_or_else(|| Error::SolverFailure("iterate left PD cone".into()))?;
    Ok(CellSolution {
        d,
        value,
        iterations,
        residual,
        converged: all_converged && residual < cfg.residual_tol,
    })
}

/// Solves one `(s, t)` cell for a model with `m_y = m_z = 1`.
pub fn inner_convex(m: &GeneralModel, params: SweepParams) -> Result<SolveReport> {
    inner_convex_with(m, params, &InnerConfig::default())
}

pub fn inner_convex_with(m: &GeneralModel, params: SweepParams, cfg: &InnerConfig) -> Result<SolveReport> {
    let sc = Scalarized::new(m)?;
    let sol = solve_cell(&sc, params, cfg)?;
    let sigma = sc.w.unwhiten(&sol.d);
    let optimum = ConditionalCov::new(m.sigma_x(), sigma)
        .map_err(|e| Error::SolverFailure(format!("optimum left the interval: {e}")))?;
    Ok(SolveReport {
        optimum,
        value: sol.value,
        iterations: sol.iterations,
        kkt_residual: sol.residual,
        converged: sol.converged,
    })
}
