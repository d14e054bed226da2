//! Information (precision) form of a source model.
//!
//! Both model kinds reduce to `sigma_x` plus two factors `F_y`, `F_z` whose
//! Gram matrices `F^T F` are the noise precisions seen in `X` coordinates:
//! `B^T B` for a general model, `sigma_w^{-1}` for an aligned one. Every
//! quantity the optimality machinery needs, e.g. `(S + sigma_wy)^{-1}`, has a
//! precision-form counterpart `F^T (I + F S F^T)^{-1} F` that stays finite when
//! `B` or `E` is rank deficient.

use nalgebra::DMatrix;

use crate::linalg::{log_det_spd, spd_inverse, SymMatrix};
use crate::model::{AlignedModel, GeneralModel};

#[derive(Debug, Clone)]
pub struct InfoForm {
    sigma_x: SymMatrix,
    fy: DMatrix<f64>,
    fz: DMatrix<f64>,
    wy: Option<SymMatrix>,
    wz: Option<SymMatrix>,
}

fn inv_chol_factor(w: &SymMatrix) -> DMatrix<f64> {
    // W = L L^T  =>  W^{-1} = (L^{-1})^T L^{-1}
    let l = w.cholesky_factor().expect("noise covariance is PD");
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n)).expect("triangular solve")
}

impl From<&GeneralModel> for InfoForm {
    fn from(m: &GeneralModel) -> Self {
        Self {
            sigma_x: m.sigma_x().clone(),
            fy: m.b().clone(),
            fz: m.e().clone(),
            wy: None,
            wz: None,
        }
    }
}

impl From<&AlignedModel> for InfoForm {
    fn from(m: &AlignedModel) -> Self {
        Self {
            sigma_x: m.sigma_x().clone(),
            fy: inv_chol_factor(m.sigma_wy()),
            fz: inv_chol_factor(m.sigma_wz()),
            wy: Some(m.sigma_wy().clone()),
            wz: Some(m.sigma_wz().clone()),
        }
    }
}

pub(crate) fn obs_log_det(f: &DMatrix<f64>, s: &SymMatrix) -> f64 {
    let inner = f * s.matrix() * f.transpose() + DMatrix::identity(f.nrows(), f.nrows());
    log_det_spd(&inner).expect("I + F S F^T is SPD")
}

/// `F^T (I + F S F^T)^{-1} F`.
pub(crate) fn gain(f: &DMatrix<f64>, s: &SymMatrix) -> SymMatrix {
    let inner = f * s.matrix() * f.transpose() + DMatrix::identity(f.nrows(), f.nrows());
    let inv = spd_inverse(&inner).expect("I + F S F^T is SPD");
    SymMatrix::from_raw(f.transpose() * inv * f)
}

impl InfoForm {
    pub fn sigma_x(&self) -> &SymMatrix {
        &self.sigma_x
    }
    pub fn dim(&self) -> usize {
        self.sigma_x.dim()
    }
    pub fn factor_y(&self) -> &DMatrix<f64> {
        &self.fy
    }
    pub fn factor_z(&self) -> &DMatrix<f64> {
        &self.fz
    }
    /// Noise covariances when they are finite (aligned input).
    pub fn sigma_wy(&self) -> Option<&SymMatrix> {
        self.wy.as_ref()
    }
    pub fn sigma_wz(&self) -> Option<&SymMatrix> {
        self.wz.as_ref()
    }

    pub fn precision_y(&self) -> SymMatrix {
        SymMatrix::from_raw(self.fy.transpose() * &self.fy)
    }
    pub fn precision_z(&self) -> SymMatrix {
        SymMatrix::from_raw(self.fz.transpose() * &self.fz)
    }

    /// `(S + sigma_wy)^{-1}` in precision form.
    pub fn gain_y(&self, s: &SymMatrix) -> SymMatrix {
        gain(&self.fy, s)
    }
    /// `(S + sigma_wz)^{-1}` in precision form.
    pub fn gain_z(&self, s: &SymMatrix) -> SymMatrix {
        gain(&self.fz, s)
    }

    /// `(I_p, I_k)` at conditional covariance `s`.
    pub fn rates(&self, s: &SymMatrix) -> (f64, f64) {
        let sx = &self.sigma_x;
        let ty = obs_log_det(&self.fy, sx) - obs_log_det(&self.fy, s);
        let tz = obs_log_det(&self.fz, sx) - obs_log_det(&self.fz, s);
        let ip = 0.5 * (sx.log_det().unwrap() - s.log_det().unwrap()) - 0.5 * ty;
        (ip, 0.5 * ty - 0.5 * tz)
    }

    /// Rates with Bob's noise replaced by the finite covariance `wy`.
    pub fn rates_with_wy(&self, wy: &SymMatrix, s: &SymMatrix) -> (f64, f64) {
        let sx = &self.sigma_x;
        let ty = (sx + wy).log_det().unwrap() - (s + wy).log_det().unwrap();
        let tz = obs_log_det(&self.fz, sx) - obs_log_det(&self.fz, s);
        let ip = 0.5 * (sx.log_det().unwrap() - s.log_det().unwrap()) - 0.5 * ty;
        (ip, 0.5 * ty - 0.5 * tz)
    }

    /// `mu log|S| + log|I + F_z S F_z^T| - (1 + mu) log|S + wy|`, the Gaussian
    /// Lagrangian of the enhanced problem up to an additive constant.
    pub fn enhanced_lagrangian(&self, wy: &SymMatrix, mu: f64, s: &SymMatrix) -> f64 {
        mu * s.log_det().unwrap() + obs_log_det(&self.fz, s)
            - (1.0 + mu) * (s + wy).log_det().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_matches_inverse_for_aligned() {
        let m = AlignedModel::from_rows(
            &[vec![2.0, 0.4], vec![0.4, 1.0]],
            &[vec![0.5, 0.1], vec![0.1, 0.8]],
            &[vec![1.5, -0.2], vec![-0.2, 0.9]],
        )
        .unwrap();
        let f = InfoForm::from(&m);
        let s = SymMatrix::from_rows("s", &[vec![1.0, 0.1], vec![0.1, 0.5]]).unwrap();
        let direct = (&s + m.sigma_wy()).inverse().unwrap();
        assert!((f.gain_y(&s).matrix() - direct.matrix()).norm() < 1e-12);
        let direct = (&s + m.sigma_wz()).inverse().unwrap();
        assert!((f.gain_z(&s).matrix() - direct.matrix()).norm() < 1e-12);
        let py = m.sigma_wy().inverse().unwrap();
        assert!((f.precision_y().matrix() - py.matrix()).norm() < 1e-12);
    }
}
