//! Rate functionals `I_p` (public communication) and `I_k` (key) of a
//! conditional covariance, in nats per source symbol.
//!
//! Every ratio of determinants is evaluated as a difference of Cholesky
//! log-determinants. `I_k` is returned raw and may be negative for
//! non-degraded models; clamping happens only when boundaries are reported.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, PSD_REL_TOL};
use crate::model::{AlignedModel, ConditionalCov, GeneralModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub rp: f64,
    pub rk: f64,
}

impl RatePair {
    pub fn new(rp: f64, rk: f64) -> Self {
        Self { rp, rk }
    }
}

fn check_q(sigma_x: &SymMatrix, q: &ConditionalCov) -> Result<()> {
    ConditionalCov::new(sigma_x, q.value().clone()).map(|_| ())
}

fn ld(m: &SymMatrix) -> f64 {
    m.log_det().expect("argument is SPD")
}

fn ld_obs(a: &DMatrix<f64>, s: &SymMatrix) -> f64 {
    ld(&(&s.congruence(a) + &SymMatrix::identity(a.nrows())))
}

/// Functionals for `Y = B X + W_y`, `Z = E X + W_z`.
pub fn rates_general(m: &GeneralModel, q: &ConditionalCov) -> Result<RatePair> {
    check_q(m.sigma_x(), q)?;
    let sx = m.sigma_x();
    let q = q.value();
    let ty = ld_obs(m.b(), sx) - ld_obs(m.b(), q);
    let tz = ld_obs(m.e(), sx) - ld_obs(m.e(), q);
    let rp = 0.5 * (ld(sx) - ld(q)) - 0.5 * ty;
    Ok(RatePair::new(rp, 0.5 * ty - 0.5 * tz))
}

fn aligned_formula(sx: &SymMatrix, wy: &SymMatrix, wz: &SymMatrix, q: &SymMatrix) -> RatePair {
    let ty = ld(&(sx + wy)) - ld(&(q + wy));
    let tz = ld(&(sx + wz)) - ld(&(q + wz));
    RatePair::new(0.5 * (ld(sx) - ld(q)) - 0.5 * ty, 0.5 * ty - 0.5 * tz)
}

/// Functionals for `Y = X + W_y`, `Z = X + W_z`.
pub fn rates_aligned(m: &AlignedModel, q: &ConditionalCov) -> Result<RatePair> {
    check_q(m.sigma_x(), q)?;
    Ok(aligned_formula(m.sigma_x(), m.sigma_wy(), m.sigma_wz(), q.value()))
}

/// Aligned functionals with Bob's noise covariance replaced by `wy_tilde`,
/// which must satisfy `0 < wy_tilde <= sigma_wy`.
pub fn rates_enhanced(m: &AlignedModel, wy_tilde: &SymMatrix, q: &ConditionalCov) -> Result<RatePair> {
    check_q(m.sigma_x(), q)?;
    if wy_tilde.dim() != m.dim() {
        return Err(Error::InvalidEnhancedNoise("dimension mismatch".into()));
    }
    if !wy_tilde.is_pd() {
        return Err(Error::InvalidEnhancedNoise("not positive definite".into()));
    }
    let gap = m.sigma_wy() - wy_tilde;
    let eig = gap.eigenvalues();
    if eig[0] < -PSD_REL_TOL * (1.0 + m.sigma_wy().max_eigenvalue()) {
        return Err(Error::InvalidEnhancedNoise("exceeds sigma_wy".into()));
    }
    Ok(aligned_formula(m.sigma_x(), wy_tilde, m.sigma_wz(), q.value()))
}

/// `lim_{R_p -> inf} R_k(R_p) = 1/2 sum_{phi_i > 1} ln phi_i`.
pub fn asymptotic_limit(m: &GeneralModel) -> f64 {
    m.gen_eigs().key_rate_limit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eq29() -> GeneralModel {
        GeneralModel::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[vec![1.0, 0.5]], &[vec![
            0.7, 0.35,
        ]])
        .unwrap()
    }

    #[test]
    fn identity_q_gives_zero_rates() {
        let m = eq29();
        let q = ConditionalCov::new(m.sigma_x(), m.sigma_x().clone()).unwrap();
        let r = rates_general(&m, &q).unwrap();
        assert_eq!((r.rp, r.rk), (0.0, 0.0));
    }

    #[test]
    fn small_q_approaches_mutual_info_gap() {
        let m = eq29();
        let q = ConditionalCov::new(m.sigma_x(), SymMatrix::from_diagonal(&[1e-9, 1e-9])).unwrap();
        let r = rates_general(&m, &q).unwrap();
        assert_relative_eq!(r.rk, 0.5 * (3.5f64 / 2.225).ln(), epsilon = 1e-8);
        assert_relative_eq!(m.mutual_info_gap(), 0.5 * (3.5f64 / 2.225).ln(), epsilon = 1e-14);
    }

    #[test]
    fn scalar_aligned_example() {
        let m = AlignedModel::from_rows(&[vec![2.0]], &[vec![1.0]], &[vec![2.0]]).unwrap();
        let q = ConditionalCov::new(m.sigma_x(), SymMatrix::from_diagonal(&[1.0])).unwrap();
        let r = rates_aligned(&m, &q).unwrap();
        assert_relative_eq!(r.rp, 0.5 * 2f64.ln() - 0.5 * 1.5f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(r.rk, 0.5 * 1.5f64.ln() - 0.5 * (4.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert_relative_eq!(r.rp, 0.143841, epsilon = 1e-6);
        assert_relative_eq!(r.rk, 0.058892, epsilon = 1e-6);
    }

    #[test]
    fn equal_noises_give_zero_key_rate() {
        let w = vec![vec![0.7, 0.1], vec![0.1, 0.4]];
        let m = AlignedModel::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]], &w, &w).unwrap();
        let q = ConditionalCov::new(m.sigma_x(), m.sigma_x().scale(0.3)).unwrap();
        assert!(rates_aligned(&m, &q).unwrap().rk.abs() < 1e-14);
    }

    #[test]
    fn enhanced_rates_edge_cases() {
        let m = AlignedModel::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]], &[vec![0.5, 0.0], vec![
            0.0, 0.5,
        ]], &[vec![0.9, 0.2], vec![0.2, 1.1]])
        .unwrap();
        let q = ConditionalCov::new(m.sigma_x(), m.sigma_x().scale(0.4)).unwrap();
        let a = rates_aligned(&m, &q).unwrap();
        let e = rates_enhanced(&m, m.sigma_wy(), &q).unwrap();
        assert_eq!(a, e);
        let bigger = m.sigma_wy().scale(1.5);
        assert!(matches!(rates_enhanced(&m, &bigger, &q), Err(Error::InvalidEnhancedNoise(_))));
    }

    #[test]
    fn rejects_foreign_conditional_cov() {
        let m = eq29();
        let other = SymMatrix::from_diagonal(&[5.0, 5.0]);
        let q = ConditionalCov::new(&other, SymMatrix::from_diagonal(&[4.0, 4.0])).unwrap();
        assert!(matches!(rates_general(&m, &q), Err(Error::InvalidConditionalCov(_))));
    }

    #[test]
    fn limit_of_paper_examples() {
        assert_relative_eq!(asymptotic_limit(&eq29()), 0.5 * (3.5f64 / 2.225).ln(), epsilon = 1e-12);
        let eq30 = GeneralModel::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[vec![1.0, 0.5]], &[
            vec![0.5, 1.0],
        ])
        .unwrap();
        // largest root of 3.5 phi^2 - 9.25 phi + 3.5
        let phi = (9.25 + (9.25f64 * 9.25 - 4.0 * 3.5 * 3.5).sqrt()) / 7.0;
        assert_relative_eq!(asymptotic_limit(&eq30), 0.5 * phi.ln(), epsilon = 1e-12);
        assert!(eq30.mutual_info_gap().abs() < 1e-15);
    }
}
