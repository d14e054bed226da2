//! Optimality certificates for boundary points and the enhanced (degraded)
//! noise construction.
//!
//! With `G_y(S) = (S + sigma_wy)^{-1}`, `G_z(S) = (S + sigma_wz)^{-1}` the
//! conditions at an optimum `S*` of `max I_k s.t. I_p <= rp` read
//!
//! ```text
//! mu S*^{-1} + G_z(S*) = (1 + mu) G_y(S*) + M,   M >= 0,   mu >= 0
//! M (sigma_x - S*) = 0,                           mu (rp - I_p(S*)) = 0
//! ```
//!
//! and the enhanced noise `W~` solves `(1 + mu)(S* + W~)^{-1} =
//! (1 + mu) G_y(S*) + M`. Everything is evaluated in precision form
//! (`G = F^T (I + F S F^T)^{-1} F`, see [`crate::channel`]), so general
//! models with rank-deficient `B` or `E` are certified by the same code; for
//! aligned models the two forms coincide.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::channel::{gain, obs_log_det, InfoForm};
use crate::error::{Error, Result};
use crate::linalg::{psd_violation, smallest_singular_value, spd_inverse, sym_eigen, symmetrize, SymMatrix};
use crate::model::{AlignedModel, ConditionalCov, GeneralModel, Model};

/// Certificate residuals above this mean the point is not certified.
pub const CERT_TOL: f64 = 1e-6;

/// Smallest singular value `K_yx` must exceed.
pub const K_SINGULAR_TOL: f64 = 1e-10;

/// Anything that reduces to the precision form.
pub trait SourceModel {
    fn info(&self) -> InfoForm;
}

impl SourceModel for AlignedModel {
    fn info(&self) -> InfoForm {
        InfoForm::from(self)
    }
}

impl SourceModel for GeneralModel {
    fn info(&self) -> InfoForm {
        InfoForm::from(self)
    }
}

impl SourceModel for Model {
    fn info(&self) -> InfoForm {
        match self {
            Model::General(g) => InfoForm::from(g),
            Model::Aligned(a) => InfoForm::from(a),
        }
    }
}

impl SourceModel for InfoForm {
    fn info(&self) -> InfoForm {
        self.clone()
    }
}

/// Normalized residuals, each `||lhs - rhs||_F / (1 + ||operands||_F)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub stationarity: f64,
    /// `||M (sigma_x - S*)||`, plus the PSD violation of `M`.
    #[serde(rename = "compl_slack_M")]
    pub compl_slack_m: f64,
    pub compl_slack_mu: f64,
    pub enhancement_def: f64,
    pub order_wy: f64,
    pub order_wz: f64,
    pub preservation: f64,
    pub rate_match: f64,
    pub proportionality: f64,
    pub k_invertibility: f64,
}

impl Residuals {
    pub fn entries(&self) -> [(&'static str, f64); 10] {
        [
            ("stationarity", self.stationarity),
            ("compl_slack_M", self.compl_slack_m),
            ("compl_slack_mu", self.compl_slack_mu),
            ("enhancement_def", self.enhancement_def),
            ("order_wy", self.order_wy),
            ("order_wz", self.order_wz),
            ("preservation", self.preservation),
            ("rate_match", self.rate_match),
            ("proportionality", self.proportionality),
            ("k_invertibility", self.k_invertibility),
        ]
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.entries().iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub sigma_star: SymMatrix,
    pub rp: f64,
    pub mu: f64,
    pub m_matrix: SymMatrix,
    /// Enhanced noise covariance; `None` when it is infinite in some
    /// direction (`mu = 0` with a rank-deficient `E`).
    pub wy_tilde: Option<SymMatrix>,
    /// `wy_tilde^{-1}`, always finite.
    pub enhanced_precision: SymMatrix,
    pub residuals: Residuals,
}

impl KktCertificate {
    pub fn is_valid(&self) -> bool {
        self.residuals.max() < CERT_TOL
    }
}

/// Enhanced noise in both forms.
#[derive(Debug, Clone, PartialEq)]
pub struct Enhanced {
    pub wy_tilde: Option<SymMatrix>,
    pub precision: SymMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeOfVariable {
    /// `sigma_{x|z} = sigma_N1`.
    pub sigma_xz: SymMatrix,
    /// `sigma_{x|uz} = (S*^{-1} + sigma_wz^{-1})^{-1}`.
    pub sigma_xuz: SymMatrix,
    pub k_xz: DMatrix<f64>,
    pub k_yx: DMatrix<f64>,
    pub k_yz: DMatrix<f64>,
    pub sigma_n2: SymMatrix,
    pub sigma_n3: SymMatrix,
    pub gamma: f64,
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / (1.0 + scale)
}

fn diff_norm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    rel((a - b).norm(), a.norm() + b.norm())
}

/// `mu S^{-1} + G_z(S) - (1 + mu) G_y(S)`.
fn m_of_mu(info: &InfoForm, s: &SymMatrix, s_inv: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let gy = gain(info.factor_y(), s);
    let gz = gain(info.factor_z(), s);
    symmetrize(&(s_inv * mu + gz.matrix() - gy.matrix() * (1.0 + mu)))
}

fn complementarity(m: &DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    psd_violation(m) + rel((m * delta).norm(), m.norm() * delta.norm())
}

/// Factor `F` with `F^T F = p` for a PSD `p` (rows for positive eigenvalues).
fn psd_factor(p: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(p);
    let top = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-14 * (1.0 + top)).collect();
    let mut f = DMatrix::zeros(keep.len().max(1), p.nrows());
    for (r, &i) in keep.iter().enumerate() {
        let scale = vals[i].sqrt();
        for c in 0..p.nrows() {
            f[(r, c)] = scale * vecs[(c, i)];
        }
    }
    f
}

fn check_sigma(info: &InfoForm, sigma_star: &SymMatrix) -> Result<DMatrix<f64>> {
    ConditionalCov::new(info.sigma_x(), sigma_star.clone())?;
    spd_inverse(sigma_star.matrix()).ok_or_else(|| Error::NotPositiveDefinite("sigma_star".into()))
}

/// Finds `(mu, M)` for `sigma_star`. A slack rate constraint forces `mu = 0`;
/// otherwise `mu` minimizes `psd_violation(M) + ||M (sigma_x - S*)||` over a
/// log-spaced scan of `{0} U [1e-8, 1e4]` refined by golden section.
pub fn recover_multipliers(m: &impl SourceModel, sigma_star: &ConditionalCov, rp: f64) -> Result<(f64, SymMatrix)> {
    let info = m.info();
    let s = sigma_star.value();
    let s_inv = check_sigma(&info, s)?;
    let delta = info.sigma_x().matrix() - s.matrix();
    let (ip, _) = info.rates(s);
    let residual = |mu: f64| complementarity(&m_of_mu(&info, s, &s_inv, mu), &delta);

    let slack_tol = 1e-6 * (1.0 + rp.abs());
    let (mu, res) = if ip < rp - slack_tol {
        (0.0, residual(0.0))
    } else {
        let n = 241;
        let grid: Vec<f64> = std::iter::once(0.0)
            .chain((0..n).map(|k| 10f64.powf(-8.0 + 12.0 * k as f64 / (n - 1) as f64)))
            .collect();
        // M(mu) = mu A + C is affine, so M (sigma_x - S*) = 0 has a least
        // squares solution; it is exact whenever the optimum is resolved
        let gy = gain(info.factor_y(), s).into_matrix();
        let gz = gain(info.factor_z(), s).into_matrix();
        let a = (&s_inv - &gy) * &delta;
        let c = (&gz - &gy) * &delta;
        let ls = -a.dot(&c) / a.norm_squared();
        let mut grid = grid;
        if ls.is_finite() && ls > 0.0 {
            grid.push(ls);
            grid.sort_by(|x, y| x.total_cmp(y));
        }
        let vals: Vec<f64> = grid.iter().map(|&mu| residual(mu)).collect();
        let mut k = 0;
        for i in 1..vals.len() {
            if vals[i] < vals[k] {
                k = i;
            }
        }
        if k == 0 || vals[k] == 0.0 {
            (grid[k], vals[k])
        } else {
            // golden section in log mu between the scan neighbours
            let lo = if k == 1 { grid[1].ln() - 2.0 } else { grid[k - 1].ln() };
            let hi = if k + 1 < grid.len() { grid[k + 1].ln() } else { grid[k].ln() + 2.0 };
            let f = |l: f64| residual(l.exp());
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (lo, hi);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (f(c), f(d));
            for _ in 0..200 {
                if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
                    break;
                }
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = f(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = f(d);
                }
            }
            let (l, v) = if fc < fd { (c, fc) } else { (d, fd) };
            if v < vals[k] { (l.exp(), v) } else { (grid[k], vals[k]) }
        }
    };
    if !(res <= CERT_TOL) {
        return Err(Error::NoValidMultiplier(res));
    }
    Ok((mu, SymMatrix::from_raw(m_of_mu(&info, s, &s_inv, mu))))
}

/// Enhanced noise `W~ = (1 + mu) [(1 + mu) G_y(S*) + M]^{-1} - S*` with its
/// precision; `M = 0` gives `sigma_wy` and `mu = 0` gives `sigma_wz`.
pub fn enhance_info(
    m: &impl SourceModel,
    sigma_star: &SymMatrix,
    mu: f64,
    m_matrix: &SymMatrix,
) -> Result<Enhanced> {
    let info = m.info();
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::NonPsdInput(format!("mu = {mu}")));
    }
    let top = m_matrix.eigenvalues().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if m_matrix.min_eigenvalue() < -1e-8 * (1.0 + top) {
        return Err(Error::NonPsdInput("M has a negative eigenvalue".into()));
    }
    let gy = gain(info.factor_y(), sigma_star);
    let a = symmetrize(&(gy.matrix() * (1.0 + mu) + m_matrix.matrix()));
    let Some(a_inv) = spd_inverse(&a) else {
        // only for mu = 0 with a singular eve gain: W~ = sigma_wz, infinite
        return Ok(Enhanced { wy_tilde: info.sigma_wz().cloned(), precision: info.precision_z() });
    };
    let w = symmetrize(&(a_inv * (1.0 + mu) - sigma_star.matrix()));
    match spd_inverse(&w) {
        Some(p) => Ok(Enhanced { wy_tilde: Some(SymMatrix::from_raw(w)), precision: SymMatrix::from_raw(p) }),
        None => Err(Error::NonPsdInput("enhanced noise is not positive definite".into())),
    }
}

/// Finite enhanced noise covariance of an aligned model.
pub fn enhance(m: &AlignedModel, sigma_star: &ConditionalCov, mu: f64, m_matrix: &SymMatrix) -> Result<SymMatrix> {
    enhance_info(m, sigma_star.value(), mu, m_matrix)?
        .wy_tilde
        .ok_or_else(|| Error::NonPsdInput("enhanced noise is infinite".into()))
}

/// Rates with Bob's observation replaced by precision factor `f`.
fn rates_with_factor(info: &InfoForm, f: &DMatrix<f64>, s: &SymMatrix) -> (f64, f64) {
    let sx = info.sigma_x();
    let ty = obs_log_det(f, sx) - obs_log_det(f, s);
    let tz = obs_log_det(info.factor_z(), sx) - obs_log_det(info.factor_z(), s);
    let ip = 0.5 * (sx.log_det().unwrap() - s.log_det().unwrap()) - 0.5 * ty;
    (ip, 0.5 * ty - 0.5 * tz)
}

fn ordering(a_cov: Option<&SymMatrix>, b_cov: Option<&SymMatrix>, a_prec: &SymMatrix, b_prec: &SymMatrix) -> f64 {
    // b <= a as covariances, or a^{-1} <= b^{-1} as precisions
    match (a_cov, b_cov) {
        (Some(a), Some(b)) => psd_violation(&(a.matrix() - b.matrix())),
        _ => psd_violation(&(b_prec.matrix() - a_prec.matrix())),
    }
}

/// Recomputes every residual of `cert` from scratch.
pub fn verify_certificate(m: &impl SourceModel, cert: &KktCertificate) -> Residuals {
    let info = m.info();
    let s = &cert.sigma_star;
    let sx = info.sigma_x();
    let mu = cert.mu;
    let nan = f64::INFINITY;
    let Some(s_inv) = spd_inverse(s.matrix()) else {
        return Residuals {
            stationarity: nan,
            compl_slack_m: nan,
            compl_slack_mu: nan,
            enhancement_def: nan,
            order_wy: nan,
            order_wz: nan,
            preservation: nan,
            rate_match: nan,
            proportionality: nan,
            k_invertibility: nan,
        };
    };
    let delta = sx.matrix() - s.matrix();
    let gy = gain(info.factor_y(), s).into_matrix();
    let m_mat = cert.m_matrix.matrix();

    let stationarity = diff_norm(&m_of_mu(&info, s, &s_inv, mu), m_mat);
    let compl_slack_m = complementarity(m_mat, &delta);
    let (ip, ik) = info.rates(s);
    let compl_slack_mu = rel(mu * (cert.rp - ip).abs(), mu + cert.rp.abs()) + (ip - cert.rp).max(0.0);

    let f_tilde = psd_factor(cert.enhanced_precision.matrix());
    let g_tilde = gain(&f_tilde, s).into_matrix();
    let enhancement_def = diff_norm(&(&g_tilde * (1.0 + mu)), &(&gy * (1.0 + mu) + m_mat));

    let order_wy = ordering(info.sigma_wy(), cert.wy_tilde.as_ref(), &info.precision_y(), &cert.enhanced_precision);
    let order_wz = ordering(info.sigma_wz(), cert.wy_tilde.as_ref(), &info.precision_z(), &cert.enhanced_precision);

    let id = DMatrix::<f64>::identity(sx.dim(), sx.dim());
    let preservation = match (info.sigma_wy(), cert.wy_tilde.as_ref()) {
        (Some(wy), Some(wt)) => {
            let lhs = (sx.matrix() + wt.matrix()) * spd_inverse(&(s.matrix() + wt.matrix())).unwrap_or(id.clone());
            let rhs = (sx.matrix() + wy.matrix()) * spd_inverse(&(s.matrix() + wy.matrix())).unwrap_or(id.clone());
            diff_norm(&lhs, &rhs)
        }
        // (sigma_x + W)(S + W)^{-1} = I + (sigma_x - S) G(S)
        _ => diff_norm(&(&id + &delta * &g_tilde), &(&id + &delta * &gy)),
    };
    let (ip_t, ik_t) = rates_with_factor(&info, &f_tilde, s);
    let rate_match = (ik - ik_t).abs() + (ip - ip_t).abs();

    let (proportionality, k_invertibility) = if mu > 0.0 {
        match change_of_variable_info(&info, &cert.enhanced_precision, s, mu) {
            Ok(cv) => (
                proportionality_residual(&cv),
                (K_SINGULAR_TOL - smallest_singular_value(&cv.k_yx)).max(0.0),
            ),
            Err(_) => (nan, nan),
        }
    } else {
        (0.0, 0.0)
    };

    Residuals {
        stationarity,
        compl_slack_m,
        compl_slack_mu,
        enhancement_def,
        order_wy,
        order_wz,
        preservation,
        rate_match,
        proportionality,
        k_invertibility,
    }
}

/// `||sigma_xuz^{-1} - gamma (sigma_xuz + sigma_N3)^{-1}||`, normalized.
pub fn proportionality_residual(cv: &ChangeOfVariable) -> f64 {
    let a = spd_inverse(cv.sigma_xuz.matrix());
    let b = spd_inverse(&(cv.sigma_xuz.matrix() + cv.sigma_n3.matrix()));
    match (a, b) {
        (Some(a), Some(b)) => diff_norm(&a, &(b * cv.gamma)),
        _ => f64::INFINITY,
    }
}

/// Full pipeline: multipliers, enhancement, residuals.
pub fn certify(m: &impl SourceModel, sigma_star: &ConditionalCov, rp: f64) -> Result<KktCertificate> {
    let info = m.info();
    let (mu, m_matrix) = recover_multipliers(&info, sigma_star, rp)?;
    let enhanced = enhance_info(&info, sigma_star.value(), mu, &m_matrix)?;
    let mut cert = KktCertificate {
        sigma_star: sigma_star.value().clone(),
        rp,
        mu,
        m_matrix,
        wy_tilde: enhanced.wy_tilde,
        enhanced_precision: enhanced.precision,
        residuals: Residuals {
            stationarity: 0.0,
            compl_slack_m: 0.0,
            compl_slack_mu: 0.0,
            enhancement_def: 0.0,
            order_wy: 0.0,
            order_wz: 0.0,
            preservation: 0.0,
            rate_match: 0.0,
            proportionality: 0.0,
            k_invertibility: 0.0,
        },
    };
    cert.residuals = verify_certificate(&info, &cert);
    Ok(cert)
}

/// Coefficients of the degraded representation `Y~ = K_yx X + K_yz Z + N2`
/// (with `Z` in `X` coordinates) and the derived covariances.
pub fn change_of_variable_info(
    m: &impl SourceModel,
    enhanced_precision: &SymMatrix,
    sigma_star: &SymMatrix,
    mu: f64,
) -> Result<ChangeOfVariable> {
    if !(mu > 0.0) {
        return Err(Error::MuZero);
    }
    let info = m.info();
    let n = info.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let pz = info.precision_z().into_matrix();
    let pt = enhanced_precision.matrix();
    // W~ < sigma_wz strictly, in precision form
    let gap = pt - &pz;
    let top = pt.norm().max(pz.norm());
    if sym_eigen(&gap).0[0] <= 1e-12 * (1.0 + top) {
        return Err(Error::NotDegraded);
    }
    let wt = spd_inverse(pt).ok_or(Error::NotDegraded)?;
    let sx_inv = spd_inverse(info.sigma_x().matrix()).expect("sigma_x is PD");
    let s_inv = spd_inverse(sigma_star.matrix()).ok_or_else(|| Error::NotPositiveDefinite("sigma_star".into()))?;
    let sigma_xz = spd_inverse(&(&sx_inv + &pz)).expect("PD sum");
    let k_xz = &sigma_xz * &pz;
    let k_yz = &wt * &pz;
    let k_yx = &id - &k_yz;
    let sigma_n2 = symmetrize(&(&wt - &wt * &pz * &wt));
    if k_yx.clone().try_inverse().is_none() {
        return Err(Error::NotDegraded);
    }
    // K^{-1} N2 K^{-T} with N2 = K W~ collapses to (P~ - P_z)^{-1}; K tends to
    // zero with mu, so the direct product loses digits as 1/mu^2
    let sigma_n3 = spd_inverse(&gap).ok_or(Error::NotDegraded)?;
    let sigma_xuz = spd_inverse(&(&s_inv + &pz)).expect("PD sum");
    Ok(ChangeOfVariable {
        sigma_xz: SymMatrix::from_raw(sigma_xz),
        sigma_xuz: SymMatrix::from_raw(sigma_xuz),
        k_xz,
        k_yx,
        k_yz,
        sigma_n2: SymMatrix::from_raw(sigma_n2),
        sigma_n3: SymMatrix::from_raw(sigma_n3),
        gamma: (1.0 + mu) / mu,
    })
}

/// Aligned-model form with a finite `wy_tilde`.
pub fn change_of_variable(
    m: &AlignedModel,
    wy_tilde: &SymMatrix,
    sigma_star: &ConditionalCov,
    mu: f64,
) -> Result<ChangeOfVariable> {
    let p = wy_tilde.inverse().map_err(|_| Error::NotDegraded)?;
    change_of_variable_info(m, &p, sigma_star.value(), mu)
}

/// `[K_yz K_yx] = [sigma_yz sigma_yx] [[sigma_z, sigma_x], [sigma_x, sigma_x]]^{-1}`
/// with `sigma_z = sigma_x + sigma_wz` and `sigma_yz = sigma_x + wy_tilde`.
pub fn coefficients_by_block_inverse(m: &AlignedModel, wy_tilde: &SymMatrix) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = m.dim();
    let sx = m.sigma_x().matrix();
    let sz = sx + m.sigma_wz().matrix();
    let syz = sx + wy_tilde.matrix();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&sz);
    big.view_mut((0, n), (n, n)).copy_from(sx);
    big.view_mut((n, 0), (n, n)).copy_from(sx);
    big.view_mut((n, n), (n, n)).copy_from(sx);
    let inv = spd_inverse(&big).ok_or_else(|| Error::NotPositiveDefinite("joint covariance of (Z, X)".into()))?;
    let mut cross = DMatrix::zeros(n, 2 * n);
    cross.view_mut((0, 0), (n, n)).copy_from(&syz);
    cross.view_mut((0, n), (n, n)).copy_from(sx);
    let k = cross * inv;
    Ok((k.columns(0, n).into_owned(), k.columns(n, n).into_owned()))
}

/// `K_yx = (I - sigma_y~ sigma_z^{-1}) sigma_x S^{-1}` with the Schur
/// complement `S = sigma_x - sigma_x sigma_z^{-1} sigma_x`.
pub fn k_yx_closed_form(m: &AlignedModel, wy_tilde: &SymMatrix) -> Result<DMatrix<f64>> {
    let n = m.dim();
    let sx = m.sigma_x().matrix();
    let sz = sx + m.sigma_wz().matrix();
    let sz_inv = spd_inverse(&sz).ok_or_else(|| Error::NotPositiveDefinite("sigma_z".into()))?;
    let sy = sx + wy_tilde.matrix();
    let schur = symmetrize(&(sx - sx * &sz_inv * sx));
    let schur_inv = spd_inverse(&schur).ok_or_else(|| Error::NotPositiveDefinite("Schur complement".into()))?;
    Ok((DMatrix::identity(n, n) - sy * sz_inv) * sx * schur_inv)
}

/// `g(S) = mu log|S| + log|I + F_z S F_z^T| - (1 + mu) log|I + F~ S F~^T|`,
/// the Gaussian Lagrangian of the enhanced problem up to a constant.
pub fn enhanced_objective(m: &impl SourceModel, cert: &KktCertificate, s: &SymMatrix) -> f64 {
    let info = m.info();
    let f_tilde = psd_factor(cert.enhanced_precision.matrix());
    cert.mu * s.log_det().unwrap_or(f64::NEG_INFINITY) + obs_log_det(info.factor_z(), s)
        - (1.0 + cert.mu) * obs_log_det(&f_tilde, s)
}

/// Largest `g(S) - g(S*)` over `samples` random `0 < S <= sigma_x`.
pub fn extremal_violation(m: &impl SourceModel, cert: &KktCertificate, samples: usize, seed: u64) -> f64 {
    let info = m.info();
    let n = info.dim();
    let half = info.sigma_x().sqrt().into_matrix();
    let g_star = enhanced_objective(&info, cert, &cert.sigma_star);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let unif = Uniform::new(1e-3, 1.0).expect("valid range");
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let q = g.qr().q();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| unif.sample(&mut rng)));
        let s = SymMatrix::from_raw(&half * &q * d * q.transpose() * &half);
        worst = worst.max(enhanced_objective(&info, cert, &s) - g_star);
    }
    worst
}
