//! Monte-Carlo cross-check of the rate functionals.
//!
//! A Gaussian auxiliary `U = X + V` with `V ~ N(0, (q^{-1} - sigma_x^{-1})^{-1})`
//! has `Cov(X | U) = q`. Sampling `(X, Y, Z, U)` and plugging the empirical
//! covariance into the Gaussian mutual information formula gives estimates of
//! `I(U;X) - I(U;Y)` and `I(U;Y) - I(U;Z)` that share no code with
//! [`crate::rates`].
//!
//! Draws come from ChaCha20 seeded with the user seed; fold `k` uses stream
//! `k`, so every fold is reproducible on its own and the result does not
//! depend on the thread count.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_det_spd, spd_inverse, symmetrize, SymMatrix};
use crate::model::{ConditionalCov, GeneralModel};

/// Number of batches for the standard error.
pub const FOLDS: usize = 10;

/// Smallest eigenvalue of `sigma_x - q`, relative to the largest of
/// `sigma_x`, accepted by [`build_joint`]. Below it `sigma_v` exceeds
/// `1e5 sigma_x` and the auxiliary carries less information than the
/// sampling noise can resolve.
pub const MIN_GAP: f64 = 1e-5;

/// Block sizes of the stacked vector `(X, Y, Z, U)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub u: usize,
}

impl Partition {
    pub fn total(&self) -> usize {
        self.x + self.y + self.z + self.u
    }

    fn x_range(&self) -> std::ops::Range<usize> {
        0..self.x
    }
    fn y_range(&self) -> std::ops::Range<usize> {
        self.x..self.x + self.y
    }
    fn z_range(&self) -> std::ops::Range<usize> {
        self.x + self.y..self.x + self.y + self.z
    }
    fn u_range(&self) -> std::ops::Range<usize> {
        self.x + self.y + self.z..self.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointCov {
    pub cov: SymMatrix,
    pub partition: Partition,
}

impl JointCov {
    /// `Cov(X | U)` from the blocks.
    pub fn conditional_x_given_u(&self) -> Result<SymMatrix> {
        let p = self.partition;
        let c = self.cov.matrix();
        let xx = c.view((0, 0), (p.x, p.x));
        let xu = c.view((0, p.x + p.y + p.z), (p.x, p.u));
        let uu = c.view((p.x + p.y + p.z, p.x + p.y + p.z), (p.u, p.u)).into_owned();
        let uu_inv = spd_inverse(&uu).ok_or_else(|| Error::NotPositiveDefinite("sigma_u".into()))?;
        Ok(SymMatrix::from_raw(symmetrize(&(xx - xu * uu_inv * xu.transpose()))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub n: usize,
    pub seed: u64,
    pub partition: Partition,
    /// Pooled covariance of all draws.
    pub joint_cov_empirical: SymMatrix,
    /// Covariance of each fold, in fold order.
    pub fold_covs: Vec<SymMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl MiEstimate {
    /// Whether `truth` lies within `k` standard errors.
    pub fn covers(&self, truth: f64, k: f64) -> bool {
        (self.value - truth).abs() <= k * self.std_error
    }
}

/// Covariance of `(X, Y, Z, U)` for the auxiliary with `Cov(X | U) = q`.
pub fn build_joint(m: &GeneralModel, q: &ConditionalCov) -> Result<JointCov> {
    let sx = m.sigma_x().matrix();
    let qm = q.value().matrix();
    let gap = SymMatrix::from_raw(symmetrize(&(sx - qm))).min_eigenvalue();
    if gap <= MIN_GAP * m.sigma_x().max_eigenvalue() {
        return Err(Error::DegenerateConditional(gap));
    }
    let sx_inv = spd_inverse(sx).ok_or_else(|| Error::NotPositiveDefinite("sigma_x".into()))?;
    let q_inv = spd_inverse(qm).ok_or_else(|| Error::NotPositiveDefinite("q".into()))?;
    let sv = spd_inverse(&symmetrize(&(q_inv - sx_inv))).ok_or(Error::DegenerateConditional(gap))?;

    let (b, e) = (m.b(), m.e());
    let p = Partition { x: m.m_x(), y: m.m_y(), z: m.m_z(), u: m.m_x() };
    let iy = DMatrix::<f64>::identity(p.y, p.y);
    let iz = DMatrix::<f64>::identity(p.z, p.z);
    // rows of (X, Y, Z, U) as linear maps of X, plus independent noise
    let blocks: [(std::ops::Range<usize>, DMatrix<f64>); 4] = [
        (p.x_range(), DMatrix::identity(p.x, p.x)),
        (p.y_range(), b.clone()),
        (p.z_range(), e.clone()),
        (p.u_range(), DMatrix::identity(p.x, p.x)),
    ];
    let mut cov = DMatrix::zeros(p.total(), p.total());
    for (ri, a) in &blocks {
        for (rj, c) in &blocks {
            cov.view_mut((ri.start, rj.start), (ri.len(), rj.len())).copy_from(&(a * sx * c.transpose()));
        }
    }
    let mut add = |r: std::ops::Range<usize>, n: &DMatrix<f64>| {
        let mut v = cov.view_mut((r.start, r.start), (r.len(), r.len()));
        v += n;
    };
    add(p.y_range(), &iy);
    add(p.z_range(), &iz);
    add(p.u_range(), &sv);
    Ok(JointCov { cov: SymMatrix::from_raw(symmetrize(&cov)), partition: p })
}

/// Fold `k` gets `n / FOLDS` draws, the first `n % FOLDS` folds one more.
fn fold_sizes(n: usize) -> Vec<usize> {
    (0..FOLDS).map(|k| n / FOLDS + usize::from(k < n % FOLDS)).collect()
}

/// Sum and sum of outer products of `count` draws from `N(0, L L^T)`.
fn draw(l: &DMatrix<f64>, count: usize, seed: u64, stream: u64) -> (DVector<f64>, DMatrix<f64>) {
    let d = l.nrows();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut sum = DVector::zeros(d);
    let mut outer = DMatrix::zeros(d, d);
    let mut g = DVector::zeros(d);
    for _ in 0..count {
        for v in g.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let x = l * &g;
        sum += &x;
        outer.ger(1.0, &x, &x, 1.0);
    }
    (sum, outer)
}

fn covariance(count: usize, sum: &DVector<f64>, outer: &DMatrix<f64>) -> SymMatrix {
    let nf = count as f64;
    let mean = sum / nf;
    let c = (outer - &mean * mean.transpose() * nf) / (nf - 1.0);
    SymMatrix::from_raw(symmetrize(&c))
}

/// `n` i.i.d. draws of the joint vector; bitwise reproducible for a seed.
pub fn sample(joint: &JointCov, n: usize, seed: u64) -> Result<SampleBatch> {
    if n < 2 * FOLDS {
        return Err(Error::InsufficientSamples { needed: 2 * FOLDS, got: n });
    }
    let c = joint.cov.matrix();
    let d = c.nrows();
    // a joint passed in by hand may be only semidefinite
    let l = match c.clone().cholesky() {
        Some(ch) => ch.l(),
        None => {
            if joint.cov.min_eigenvalue() < -1e-10 * (1.0 + joint.cov.max_eigenvalue()) {
                return Err(Error::NotPsd("joint covariance".into()));
            }
            crate::linalg::sym_func(c, |v| v.max(0.0).sqrt())
        }
    };
    let sizes = fold_sizes(n);
    let parts: Vec<(DVector<f64>, DMatrix<f64>)> =
        sizes.par_iter().enumerate().map(|(k, &count)| draw(&l, count, seed, k as u64)).collect();
    let fold_covs = parts.iter().zip(&sizes).map(|((s, o), &count)| covariance(count, s, o)).collect();
    let (sum, outer) = parts
        .iter()
        .fold((DVector::zeros(d), DMatrix::zeros(d, d)), |(s, o), (ps, po)| (s + ps, o + po));
    Ok(SampleBatch {
        n,
        seed,
        partition: joint.partition,
        joint_cov_empirical: covariance(n, &sum, &outer),
        fold_covs,
    })
}

fn block(c: &DMatrix<f64>, ranges: &[std::ops::Range<usize>]) -> DMatrix<f64> {
    let idx: Vec<usize> = ranges.iter().flat_map(|r| r.clone()).collect();
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| c[(idx[i], idx[j])])
}

/// `I(A;B) = (log|C_A| + log|C_B| - log|C_AB|) / 2` from covariance blocks.
fn mutual_info(c: &DMatrix<f64>, a: std::ops::Range<usize>, b: std::ops::Range<usize>) -> Result<f64> {
    let ld = |m: DMatrix<f64>| log_det_spd(&m).ok_or(Error::SingularEmpiricalCov);
    Ok(0.5 * (ld(block(c, std::slice::from_ref(&a)))? + ld(block(c, std::slice::from_ref(&b)))? - ld(block(c, &[a, b]))?))
}

/// `(I(U;X) - I(U;Y), I(U;Y) - I(U;Z))` of a covariance.
pub fn plug_in_rates(c: &SymMatrix, p: Partition) -> Result<(f64, f64)> {
    let c = c.matrix();
    let ux = mutual_info(c, p.u_range(), p.x_range())?;
    let uy = mutual_info(c, p.u_range(), p.y_range())?;
    let uz = mutual_info(c, p.u_range(), p.z_range())?;
    Ok((ux - uy, uy - uz))
}

/// Plug-in estimates from the pooled covariance, with standard errors from
/// the spread of the per-fold estimates.
pub fn estimate_rates(batch: &SampleBatch) -> Result<(MiEstimate, MiEstimate)> {
    if batch.n < 2 || batch.fold_covs.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2 * FOLDS, got: batch.n });
    }
    let (rp, rk) = plug_in_rates(&batch.joint_cov_empirical, batch.partition)?;
    let folds: Vec<(f64, f64)> =
        batch.fold_covs.iter().map(|c| plug_in_rates(c, batch.partition)).collect::<Result<_>>()?;
    let k = folds.len() as f64;
    let se = |vals: Vec<f64>| {
        let mean = vals.iter().sum::<f64>() / k;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    };
    Ok((
        MiEstimate { value: rp, std_error: se(folds.iter().map(|f| f.0).collect()) },
        MiEstimate { value: rk, std_error: se(folds.iter().map(|f| f.1).collect()) },
    ))
}

/// Build, sample and estimate in one call.
pub fn cross_check(m: &GeneralModel, q: &ConditionalCov, n: usize, seed: u64) -> Result<(MiEstimate, MiEstimate)> {
    let joint = build_joint(m, q)?;
    estimate_rates(&sample(&joint, n, seed)?)
}
