//! Multi-start ascent for `max I_k(sigma) s.t. I_p(sigma) <= rp` in any
//! dimension.
//!
//! Each start runs projected gradient ascent on the exact penalty
//! `I_k - c max(0, I_p - rp)` over `{floor <= D <= I}` and is then polished
//! by a log-barrier Newton method on
//! `-tau I_k - log|D| - log|I - D| - log(rp - I_p)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use super::newton::{minimize, Objective, BARRIER_RELAXED_TOL};
use super::whiten::{Taylor, Whitened};
use crate::channel::InfoForm;
use crate::error::Result;
use crate::linalg::{log_det_ratio, spd_inverse, sym_eigen, symmetrize};
use crate::model::{AlignedModel, GeneralModel, Model};
use crate::rates::{asymptotic_limit, RatePair};
use crate::region::{check_rp_grid, finalize, PointMeta, PointStatus, RegionBoundary};

#[derive(Debug, Clone, Copy)]
pub struct AscentConfig {
    pub random_starts: usize,
    pub seed: u64,
    pub gradient_steps: usize,
    /// Eigenvalue floor of the projection, relative to `tr(D) / m = 1`.
    pub floor: f64,
    /// Barrier stops when `theta / tau` drops below this.
    pub gap_tol: f64,
    /// Largest barrier weight tried while the rate constraint is still slack.
    pub max_tau: f64,
    pub max_newton: usize,
    /// Newton budget of one barrier stage.
    pub max_stage: usize,
    /// Distance to the asymptotic limit under which a point is reported as
    /// saturated.
    pub saturation_tol: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            random_starts: 4,
            seed: 0x5eed_a5ce,
            gradient_steps: 400,
            floor: 1e-9,
            gap_tol: 1e-11,
            max_tau: 1e18,
            max_newton: 3000,
            max_stage: 200,
            saturation_tol: 1e-9,
        }
    }
}

/// Matrix gradients of `I_p` and `I_k` at `D`.
fn gradients(w: &Whitened, d: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let gain = |f: &DMatrix<f64>| -> Option<DMatrix<f64>> {
        let k = f.nrows();
        let inner = f * d * f.transpose() + DMatrix::identity(k, k);
        Some(f.transpose() * spd_inverse(&inner)? * f)
    };
    let gy = gain(&w.fy)?;
    let gz = gain(&w.fz)?;
    let dinv = spd_inverse(d)?;
    Some((symmetrize(&((gy.clone() - dinv) * 0.5)), symmetrize(&((gz - gy) * 0.5))))
}

fn project(d: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(d);
    let clipped = DMatrix::from_diagonal(&vals.map(|v| v.clamp(floor, 1.0)));
    symmetrize(&(&vecs * clipped * vecs.transpose()))
}

fn penalized(w: &Whitened, d: &DMatrix<f64>, rp: f64, c: f64) -> Option<f64> {
    let (ip, ik) = w.rates(d)?;
    Some(ik - c * (ip - rp).max(0.0))
}

/// Projected gradient ascent on the exact penalty.
fn gradient_phase(w: &Whitened, start: DMatrix<f64>, rp: f64, cfg: &AscentConfig) -> DMatrix<f64> {
    let mut d = project(&start, cfg.floor);
    let mut c = 4.0;
    for _round in 0..4 {
        let mut step = 0.5;
        for _ in 0..cfg.gradient_steps {
            let Some((ip, _)) = w.rates(&d) else { break };
            let Some((gp, gk)) = gradients(w, &d) else { break };
            let g = if ip > rp { gk - gp * c } else { gk };
            let f0 = penalized(w, &d, rp, c).unwrap();
            let mut moved = false;
            while step > 1e-14 {
                let trial = project(&(&d + &g * step), cfg.floor);
                let gain = g.dot(&(&trial - &d));
                if let Some(f1) = penalized(w, &trial, rp, c) {
                    if f1 >= f0 + 1e-4 * gain && (&trial - &d).norm() > 0.0 {
                        d = trial;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
            step = (step * 2.0).min(1e3);
        }
        match w.rates(&d) {
            Some((ip, _)) if ip > rp + 1e-6 => c *= 10.0,
            _ => break,
        }
    }
    d
}

struct Barrier<'a> {
    w: &'a Whitened,
    rp: f64,
    tau: f64,
}

impl Objective for Barrier<'_> {
    fn eval(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let d = self.w.basis.to_matrix(x);
        let ld = self.w.log_det(&d)?;
        let lc = self.w.log_det_complement(&d)?;
        let ip = self.w.ip_taylor(&d)?;
        let ik = self.w.ik_taylor(&d)?;
        let slack = self.rp - ip.value;
        if slack <= 0.0 {
            return None;
        }
        let mut t = Taylor::zero(x.len());
        t.add_scaled(-self.tau, &ik);
        t.add_scaled(-1.0, &ld);
        t.add_scaled(-1.0, &lc);
        // -log(rp - I_p)
        t.value -= slack.ln();
        t.grad += &ip.grad / slack;
        t.hess += &ip.hess / slack + &ip.grad * ip.grad.transpose() / (slack * slack);
        Some((t.value, t.grad, t.hess))
    }

    fn delta(&self, x: &DVector<f64>, dx: &DVector<f64>, step: f64) -> Option<f64> {
        let basis = &self.w.basis;
        let (d, dd) = (basis.to_matrix(x), basis.to_matrix(dx));
        let (ip, _) = self.w.rates(&d)?;
        let (dip, dik) = self.w.rates_delta(&d, &dd, step)?;
        let ld = log_det_ratio(&d, &dd, step)?;
        let lc = log_det_ratio(&(DMatrix::identity(d.nrows(), d.nrows()) - &d), &(-dd), step)?;
        let slack = self.rp - ip;
        let r = -dip / slack;
        if !(r > -1.0) {
            return None;
        }
        Some(-self.tau * dik - ld - lc - r.ln_1p())
    }

    fn relaxed_tol(&self) -> f64 {
        BARRIER_RELAXED_TOL
    }

    fn precondition(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.w.basis.interval_scaling(&self.w.basis.to_matrix(x)))
    }
}

fn strictly_interior(w: &Whitened, d: &DMatrix<f64>, rp: f64) -> bool {
    let vals = sym_eigen(d).0;
    vals[0] > 0.0 && vals[vals.len() - 1] < 1.0 && w.rates(d).is_some_and(|(ip, _)| ip < rp)
}

/// Pulls `d` toward a strictly feasible multiple of the identity until it is
/// strictly feasible itself.
fn make_interior(w: &Whitened, d: &DMatrix<f64>, rp: f64) -> Option<DMatrix<f64>> {
    let m = w.m;
    let id = DMatrix::<f64>::identity(m, m);
    let center = (1..=15)
        .map(|k| 1.0 - 10f64.powi(-k))
        .map(|c| &id * c)
        .rev()
        .find(|c| strictly_interior(w, c, 0.5 * rp))
        .or_else(|| [0.5, 0.9].iter().map(|&c| &id * c).find(|c| strictly_interior(w, c, rp)))?;
    let (vals, vecs) = sym_eigen(d);
    let clipped = DMatrix::from_diagonal(&vals.map(|v| v.clamp(1e-300, 1.0 - 1e-12)));
    let d = symmetrize(&(&vecs * clipped * vecs.transpose()));
    let lams = [0.0, 1e-12, 1e-9, 1e-6, 1e-4, 1e-2]
        .into_iter()
        .map(|e| 1.0 - e)
        .chain((1..40).map(|k| 0.8f64.powi(k)));
    for lam in lams {
        let trial = &d * lam + &center * (1.0 - lam);
        if strictly_interior(w, &trial, rp) {
            return Some(trial);
        }
    }
    Some(center)
}

pub(crate) struct Polished {
    pub d: DMatrix<f64>,
    pub residual: f64,
    pub converged: bool,
}

/// Barrier path following from `tau0`; a large `tau0` keeps the result near
/// a good starting point.
fn polish(w: &Whitened, d0: DMatrix<f64>, rp: f64, tau0: f64, cfg: &AscentConfig) -> Polished {
    let theta = (2 * w.m + 1) as f64;
    let mut x = w.basis.to_coords(&d0);
    let mut tau = tau0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    // once the gap is closed, a tiny multiplier can still leave the rate
    // constraint visibly slack; keep going until it is resolved
    let resolved = |x: &DVector<f64>| {
        w.rates(&w.basis.to_matrix(x)).is_some_and(|(ip, _)| rp - ip <= 1e-7 * (1.0 + rp))
    };
    let mut gap_closed = false;
    loop {
        let obj = Barrier { w, rp, tau };
        let out = minimize(&obj, x.clone(), 1e-14, cfg.max_stage, |_| false);
        iterations += out.iterations;
        if !out.converged || iterations > cfg.max_newton || !out.x.iter().all(|v| v.is_finite()) {
            if gap_closed {
                return Polished { d: w.basis.to_matrix(&x), residual, converged: true };
            }
            return Polished { d: w.basis.to_matrix(&out.x), residual, converged: false };
        }
        x = out.x;
        residual = theta / tau;
        gap_closed = residual < cfg.gap_tol;
        if gap_closed && (resolved(&x) || tau >= cfg.max_tau) {
            return Polished { d: w.basis.to_matrix(&x), residual, converged: true };
        }
        tau *= 10.0;
    }
}

fn starts(m: usize, cfg: &AscentConfig) -> Vec<DMatrix<f64>> {
    let id = DMatrix::<f64>::identity(m, m);
    let mut out: Vec<DMatrix<f64>> = [1.0, 0.75, 0.5, 0.25].iter().map(|&c| &id * c).collect();
    let unif = Uniform::new(0.05, 1.0).expect("valid range");
    for k in 0..cfg.random_starts {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let g = DMatrix::<f64>::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
        let q = g.qr().q();
        let u = DVector::from_fn(m, |_, _| unif.sample(&mut rng));
        out.push(symmetrize(&(&q * DMatrix::from_diagonal(&u) * q.transpose())));
    }
    out
}

/// Local refinement of a feasible point; `None` when it cannot be made
/// strictly feasible.
pub(crate) fn refine(w: &Whitened, d: &DMatrix<f64>, rp: f64, cfg: &AscentConfig) -> Option<(Polished, f64, f64)> {
    let d0 = make_interior(w, d, rp)?;
    let p = polish(w, d0, rp, 1e4, cfg);
    let (ip, ik) = w.rates(&p.d)?;
    (ip <= rp).then_some((p, ip, ik))
}

struct Outcome {
    d: DMatrix<f64>,
    ip: f64,
    ik: f64,
    residual: f64,
    converged: bool,
}

fn solve_point(w: &Whitened, rp: f64, cfg: &AscentConfig) -> Outcome {
    let m = w.m;
    let id = DMatrix::<f64>::identity(m, m);
    let corner = Outcome { d: id.clone(), ip: 0.0, ik: 0.0, residual: 0.0, converged: true };
    if rp <= 1e-14 {
        return corner;
    }
    let candidates: Vec<Outcome> = starts(m, cfg)
        .into_iter()
        .filter_map(|s| {
            let d = gradient_phase(w, s, rp, cfg);
            let d0 = make_interior(w, &d, rp)?;
            let p = polish(w, d0, rp, 10.0, cfg);
            let (ip, ik) = w.rates(&p.d)?;
            (ip <= rp).then_some(Outcome { d: p.d, ip, ik, residual: p.residual, converged: p.converged })
        })
        .collect();
    candidates
        .into_iter()
        .fold(corner, |best, c| if c.ik > best.ik || (c.ik == best.ik && c.ip < best.ip) { c } else { best })
}

fn boundary(info: &InfoForm, digest: String, limit: f64, rp_grid: &[f64], cfg: &AscentConfig) -> Result<RegionBoundary> {
    check_rp_grid(rp_grid)?;
    let w = Whitened::new(info);
    let outcomes: Vec<Outcome> = rp_grid.par_iter().map(|&rp| solve_point(&w, rp, cfg)).collect();
    let mut points = Vec::with_capacity(rp_grid.len());
    let mut meta = Vec::with_capacity(rp_grid.len());
    for (&rp, o) in rp_grid.iter().zip(outcomes) {
        let status = if limit - o.ik <= cfg.saturation_tol && limit > 0.0 {
            PointStatus::Saturated
        } else if o.converged {
            PointStatus::Converged
        } else {
            PointStatus::Unconverged
        };
        points.push(RatePair { rp, rk: o.ik });
        meta.push(PointMeta {
            s: None,
            t: None,
            kkt_residual: o.residual,
            status,
            sigma_star: w.unwhiten(&o.d),
            ip: o.ip,
            ik: o.ik,
        });
    }
    finalize(&mut points, &mut meta);
    Ok(RegionBoundary { points, model_digest: digest, solver_meta: meta, asymptotic_limit: limit, failures: vec![] })
}

/// Boundary of an aligned model on an ascending `rp_grid`.
pub fn ascent_boundary(m: &AlignedModel, rp_grid: &[f64]) -> Result<RegionBoundary> {
    ascent_boundary_with(m, rp_grid, &AscentConfig::default())
}

pub fn ascent_boundary_with(m: &AlignedModel, rp_grid: &[f64], cfg: &AscentConfig) -> Result<RegionBoundary> {
    let digest = Model::from(m.clone()).digest();
    let limit = asymptotic_limit(&m.to_general());
    boundary(&InfoForm::from(m), digest, limit, rp_grid, cfg)
}

/// Same ascent for a general model, in precision form.
pub fn ascent_boundary_general(m: &GeneralModel, rp_grid: &[f64], cfg: &AscentConfig) -> Result<RegionBoundary> {
    let digest = Model::from(m.clone()).digest();
    boundary(&InfoForm::from(m), digest, asymptotic_limit(m), rp_grid, cfg)
}
