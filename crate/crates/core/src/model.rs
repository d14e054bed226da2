//! Source models and their transformations.
//!
//! A [`GeneralModel`] describes `Y = B X + W_y`, `Z = E X + W_z` with identity
//! noise covariances. An [`AlignedModel`] describes `Y = X + W_y`, `Z = X + W_z`
//! with arbitrary (invertible) noise covariances. Both share `X ~ N(0, sigma_x)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, generalized_eigenvalues, matrix_from_rows, matrix_to_rows, SymMatrix,
    PSD_REL_TOL,
};

/// Largest condition number accepted when inverting observation matrices.
pub const MAX_CONDITION: f64 = 1e12;

/// Generalized eigenvalues at or below `1 + RHO_TOL` are not counted in `rho`;
/// this keeps `B = E` from contributing round-off to the key-rate limit.
pub const RHO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralModel {
    sigma_x: SymMatrix,
    b: DMatrix<f64>,
    e: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedModel {
    sigma_x: SymMatrix,
    sigma_wy: SymMatrix,
    sigma_wz: SymMatrix,
}

/// Either kind of model, as read from a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    General(GeneralModel),
    Aligned(AlignedModel),
}

fn require_pd(name: &str, m: &SymMatrix) -> Result<()> {
    if m.is_pd() {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite(name.to_string()))
    }
}

impl GeneralModel {
    pub fn new(sigma_x: SymMatrix, b: DMatrix<f64>, e: DMatrix<f64>) -> Result<Self> {
        require_pd("sigma_x", &sigma_x)?;
        let m = sigma_x.dim();
        for (name, mat) in [("b", &b), ("e", &e)] {
            if mat.ncols() != m || mat.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "`{name}` is {}x{}, expected ?x{m}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("`{name}` has non-finite entries")));
            }
        }
        Ok(Self { sigma_x, b, e })
    }

    pub fn from_rows(sigma_x: &[Vec<f64>], b: &[Vec<f64>], e: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            SymMatrix::from_rows("sigma_x", sigma_x)?,
            matrix_from_rows("b", b)?,
            matrix_from_rows("e", e)?,
        )
    }

    pub fn sigma_x(&self) -> &SymMatrix {
        &self.sigma_x
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn m_x(&self) -> usize {
        self.sigma_x.dim()
    }
    pub fn m_y(&self) -> usize {
        self.b.nrows()
    }
    pub fn m_z(&self) -> usize {
        self.e.nrows()
    }

    /// `I(X;Y) - I(X;Z)` in nats.
    pub fn mutual_info_gap(&self) -> f64 {
        let ly = self.sigma_x.congruence(&self.b);
        let lz = self.sigma_x.congruence(&self.e);
        let iy = (&ly + &SymMatrix::identity(self.m_y())).log_det().unwrap();
        let iz = (&lz + &SymMatrix::identity(self.m_z())).log_det().unwrap();
        0.5 * (iy - iz)
    }

    /// Equivalent aligned model when `B` and `E` are square and invertible:
    /// `Y' = B^{-1} Y = X + B^{-1} W_y`, so `sigma_wy = B^{-1} B^{-T}`.
    pub fn to_aligned(&self) -> Result<AlignedModel> {
        let inv = |name: &str, m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            if m.nrows() != m.ncols() {
                return Err(Error::NotSquare(name.to_string()));
            }
            let cond = condition_number(m);
            if !(cond < MAX_CONDITION) {
                return Err(Error::NearSingular { name: name.to_string(), cond });
            }
            m.clone()
                .try_inverse()
                .ok_or(Error::NearSingular { name: name.to_string(), cond })
        };
        let bi = inv("b", &self.b)?;
        let ei = inv("e", &self.e)?;
        AlignedModel::new(
            self.sigma_x.clone(),
            SymMatrix::from_raw(&bi * bi.transpose()),
            SymMatrix::from_raw(&ei * ei.transpose()),
        )
    }

    /// Generalized eigenvalues of the pencil
    /// `(S B^T B S + I, S E^T E S + I)` with `S = sigma_x^{1/2}`.
    pub fn gen_eigs(&self) -> GenEigResult {
        let (a, c) = self.pencil();
        let phis = generalized_eigenvalues(&a, &c).expect("pencil matrices are SPD by construction");
        GenEigResult::from_phis(phis)
    }

    /// The two pencil matrices `(A, C)` used by [`GeneralModel::gen_eigs`].
    pub fn pencil(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let s = self.sigma_x.sqrt();
        let m = self.m_x();
        let id = DMatrix::<f64>::identity(m, m);
        let a = s.matrix() * self.b.transpose() * &self.b * s.matrix() + &id;
        let c = s.matrix() * self.e.transpose() * &self.e * s.matrix() + &id;
        (a, c)
    }

    /// Square `m_x x m_x` observation matrices carrying the same information.
    ///
    /// Fewer rows than `m_x`: append zero rows (pure-noise outputs).
    /// More rows: `B = U diag(l) V^T` and only `diag(l) V^T` is kept, since
    /// the discarded outputs `U_perp^T Y` are independent noise.
    pub fn square_equivalent(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (square_observation(&self.b, self.m_x()), square_observation(&self.e, self.m_x()))
    }

    /// Perturbs both observation matrices' singular values by `alpha` so that
    /// they become invertible, and reports the key-rate allowance
    /// `1/2 log|E_bar S E_bar^T + I| - 1/2 log|E S E^T + I|` that bounds how
    /// much the region can shrink.
    pub fn perturb_svd(&self, alpha: f64) -> Result<PerturbedPair> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::NonPositiveAlpha(alpha));
        }
        let (bs, es) = self.square_equivalent();
        let bump = |m: DMatrix<f64>| -> DMatrix<f64> {
            let svd = m.svd(true, true);
            let u = svd.u.unwrap();
            let vt = svd.v_t.unwrap();
            let lam = DMatrix::from_diagonal(&svd.singular_values.map(|v| v + alpha));
            u * lam * vt
        };
        let b_bar = bump(bs);
        let e_bar = bump(es);
        let model_bar = GeneralModel::new(self.sigma_x.clone(), b_bar, e_bar)?;
        let ld = |e: &DMatrix<f64>| {
            (&self.sigma_x.congruence(e) + &SymMatrix::identity(e.nrows())).log_det().unwrap()
        };
        let gap = (0.5 * (ld(model_bar.e()) - ld(&self.e))).max(0.0);
        Ok(PerturbedPair { model_bar, alpha, gap })
    }

    fn to_file(&self) -> ModelFile {
        ModelFile::General {
            sigma_x: self.sigma_x.to_rows(),
            b: matrix_to_rows(&self.b),
            e: matrix_to_rows(&self.e),
        }
    }
}

fn square_observation(a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    use std::cmp::Ordering;
    match a.nrows().cmp(&m) {
        Ordering::Equal => a.clone(),
        Ordering::Less => {
            let mut out = DMatrix::zeros(m, m);
            out.rows_mut(0, a.nrows()).copy_from(a);
            out
        }
        Ordering::Greater => {
            let svd = a.clone().svd(false, true);
            let vt = svd.v_t.unwrap();
            DMatrix::from_diagonal(&svd.singular_values) * vt
        }
    }
}

impl AlignedModel {
    pub fn new(sigma_x: SymMatrix, sigma_wy: SymMatrix, sigma_wz: SymMatrix) -> Result<Self> {
        let m = sigma_x.dim();
        for (name, mat) in [("sigma_wy", &sigma_wy), ("sigma_wz", &sigma_wz)] {
            if mat.dim() != m {
                return Err(Error::DimensionMismatch(format!(
                    "`{name}` is {0}x{0}, expected {m}x{m}",
                    mat.dim()
                )));
            }
        }
        require_pd("sigma_x", &sigma_x)?;
        require_pd("sigma_wy", &sigma_wy)?;
        require_pd("sigma_wz", &sigma_wz)?;
        Ok(Self { sigma_x, sigma_wy, sigma_wz })
    }

    pub fn from_rows(sigma_x: &[Vec<f64>], wy: &[Vec<f64>], wz: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            SymMatrix::from_rows("sigma_x", sigma_x)?,
            SymMatrix::from_rows("sigma_wy", wy)?,
            SymMatrix::from_rows("sigma_wz", wz)?,
        )
    }

    pub fn sigma_x(&self) -> &SymMatrix {
        &self.sigma_x
    }
    pub fn sigma_wy(&self) -> &SymMatrix {
        &self.sigma_wy
    }
    pub fn sigma_wz(&self) -> &SymMatrix {
        &self.sigma_wz
    }
    pub fn dim(&self) -> usize {
        self.sigma_x.dim()
    }

    /// `sigma_wy <= sigma_wz` in the Loewner order (PSD tolerance).
    pub fn is_degraded(&self) -> bool {
        (&self.sigma_wz - &self.sigma_wy).is_psd()
    }

    /// Observation form with `B = sigma_wy^{-1/2}`, `E = sigma_wz^{-1/2}`.
    pub fn to_general(&self) -> GeneralModel {
        let inv_sqrt = |w: &SymMatrix| w.inverse().unwrap().sqrt().into_matrix();
        GeneralModel {
            sigma_x: self.sigma_x.clone(),
            b: inv_sqrt(&self.sigma_wy),
            e: inv_sqrt(&self.sigma_wz),
        }
    }

    fn to_file(&self) -> ModelFile {
        ModelFile::Aligned {
            sigma_x: self.sigma_x.to_rows(),
            sigma_wy: self.sigma_wy.to_rows(),
            sigma_wz: self.sigma_wz.to_rows(),
        }
    }
}

/// Conditional covariance of `X` given the auxiliary variable `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCov(SymMatrix);

impl ConditionalCov {
    /// Checks `0 < value <= sigma_x` (strict PD with `min eig > 1e-10`, upper
    /// bound with the PSD tolerance).
    pub fn new(sigma_x: &SymMatrix, value: SymMatrix) -> Result<Self> {
        if value.dim() != sigma_x.dim() {
            return Err(Error::InvalidConditionalCov(format!(
                "dimension {} does not match sigma_x dimension {}",
                value.dim(),
                sigma_x.dim()
            )));
        }
        if !value.is_pd() {
            return Err(Error::InvalidConditionalCov("not positive definite".into()));
        }
        let gap = sigma_x - &value;
        let eig = gap.eigenvalues();
        let scale = eig.iter().fold(sigma_x.max_eigenvalue(), |a, v| a.max(v.abs()));
        if eig[0] < -PSD_REL_TOL * (1.0 + scale) {
            return Err(Error::InvalidConditionalCov("exceeds sigma_x".into()));
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> &SymMatrix {
        &self.0
    }

    pub fn into_inner(self) -> SymMatrix {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenEigResult {
    /// Descending.
    pub phis: Vec<f64>,
    pub rho: usize,
}

impl GenEigResult {
    fn from_phis(phis: Vec<f64>) -> Self {
        let rho = phis.iter().filter(|&&p| p > 1.0 + RHO_TOL).count();
        Self { phis, rho }
    }

    /// `1/2 sum_{i <= rho} ln phi_i`.
    pub fn key_rate_limit(&self) -> f64 {
        0.5 * self.phis[..self.rho].iter().map(|p| p.ln()).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedPair {
    pub model_bar: GeneralModel,
    pub alpha: f64,
    /// Nats.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum ModelFile {
    General { sigma_x: Vec<Vec<f64>>, b: Vec<Vec<f64>>, e: Vec<Vec<f64>> },
    Aligned { sigma_x: Vec<Vec<f64>>, sigma_wy: Vec<Vec<f64>>, sigma_wz: Vec<Vec<f64>> },
}

impl Model {
    /// Parses and validates a model file (see README for the schema).
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        match file {
            ModelFile::General { sigma_x, b, e } => {
                GeneralModel::from_rows(&sigma_x, &b, &e).map(Model::General)
            }
            ModelFile::Aligned { sigma_x, sigma_wy, sigma_wz } => {
                AlignedModel::from_rows(&sigma_x, &sigma_wy, &sigma_wz).map(Model::Aligned)
            }
        }
    }

    pub fn to_json(&self) -> String {
        let file = match self {
            Model::General(m) => m.to_file(),
            Model::Aligned(m) => m.to_file(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn sigma_x(&self) -> &SymMatrix {
        match self {
            Model::General(m) => m.sigma_x(),
            Model::Aligned(m) => m.sigma_x(),
        }
    }

    /// General observation form of either variant.
    pub fn as_general(&self) -> GeneralModel {
        match self {
            Model::General(m) => m.clone(),
            Model::Aligned(m) => m.to_general(),
        }
    }
}

impl From<GeneralModel> for Model {
    fn from(m: GeneralModel) -> Self {
        Model::General(m)
    }
}

impl From<AlignedModel> for Model {
    fn from(m: AlignedModel) -> Self {
        Model::Aligned(m)
    }
}

/// Validates a model (already constructed values are re-checked).
pub fn validate_model(m: &Model) -> Result<Model> {
    match m {
        Model::General(g) => {
            GeneralModel::new(g.sigma_x.clone(), g.b.clone(), g.e.clone()).map(Model::General)
        }
        Model::Aligned(a) => {
            AlignedModel::new(a.sigma_x.clone(), a.sigma_wy.clone(), a.sigma_wz.clone())
                .map(Model::Aligned)
        }
    }
}
