//! Dense symmetric-matrix kernel.
//!
//! Everything here works on small real matrices (a handful of rows), so the
//! routines favour clarity over blocking. Log-determinants always go through a
//! Cholesky factor; inverses of SPD matrices likewise.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted on input.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Strict positive definiteness: smallest eigenvalue must exceed this.
pub const PD_TOL: f64 = 1e-10;
/// PSD acceptance: smallest eigenvalue >= -PSD_REL_TOL * (1 + max |eig|).
pub const PSD_REL_TOL: f64 = 1e-10;

/// A real symmetric matrix.
///
/// Construction checks squareness and symmetry, then stores the exact
/// symmetrization `(A + A^T) / 2` so downstream eigen-solvers see a truly
/// symmetric operand.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(name: &str, m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare(name.to_string()));
        }
        if m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!("`{name}` is empty")));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("`{name}` has non-finite entries")));
        }
        let scale = m.amax().max(1.0);
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::AsymmetricInput(name.to_string()));
                }
            }
        }
        Ok(Self(symmetrize(&m)))
    }

    /// Wraps a matrix already known to be symmetric up to round-off.
    pub(crate) fn from_raw(m: DMatrix<f64>) -> Self {
        Self(symmetrize(&m))
    }

    pub fn from_rows(name: &str, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(name, matrix_from_rows(name, rows)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigen(&self.0).0.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().unwrap()
    }

    pub fn is_pd(&self) -> bool {
        self.min_eigenvalue() > PD_TOL
    }

    pub fn is_psd(&self) -> bool {
        let eig = self.eigenvalues();
        let scale = eig.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        eig[0] >= -PSD_REL_TOL * (1.0 + scale)
    }

    /// Lower Cholesky factor, or `None` when the matrix is not numerically SPD.
    pub fn cholesky_factor(&self) -> Option<DMatrix<f64>> {
        self.0.clone().cholesky().map(|c| c.l())
    }

    pub fn log_det(&self) -> Result<f64> {
        log_det_spd(&self.0).ok_or_else(|| Error::NotPositiveDefinite("log-det argument".into()))
    }

    pub fn inverse(&self) -> Result<Self> {
        spd_inverse(&self.0)
            .map(Self::from_raw)
            .ok_or_else(|| Error::NotPositiveDefinite("inverse argument".into()))
    }

    /// Principal square root; negative round-off eigenvalues are clamped to 0.
    pub fn sqrt(&self) -> Self {
        Self::from_raw(sym_func(&self.0, |v| v.max(0.0).sqrt()))
    }

    /// `A S A^T` for a rectangular `A`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Self {
        Self::from_raw(a * &self.0 * a.transpose())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(&self.0 * k)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix({:?})", self.to_rows())
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, k: f64) -> SymMatrix {
        self.scale(k)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows("matrix", &rows).map_err(serde::de::Error::custom)
    }
}

pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::DimensionMismatch(format!("`{name}` has no rows")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("`{name}` has ragged or empty rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending and the
/// eigenvector columns permuted to match.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    if m.nrows() == 2 {
        return sym_eigen_2x2(m);
    }
    let eig = symmetrize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

// Jacobi rotation in closed form; the solvers spend most of their time here.
fn sym_eigen_2x2(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (a, c) = (m[(0, 0)], m[(1, 1)]);
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (sn, cs) = theta.sin_cos();
    let vals = DVector::from_vec(vec![mean - r, mean + r]);
    let vecs = DMatrix::from_row_slice(2, 2, &[-sn, cs, cs, sn]);
    (vals, vecs)
}

/// Applies a scalar function to the spectrum of a symmetric matrix.
pub fn sym_func(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let d = DMatrix::from_diagonal(&vals.map(f));
    symmetrize(&(&vecs * d * vecs.transpose()))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).0[0]
}

pub fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    Some(2.0 * (0..m.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

/// `log|A + step B| - log|A|` for SPD `A`, accurate when the two are close;
/// `None` if `A + step B` is not PD.
pub fn log_det_ratio(a: &DMatrix<f64>, b: &DMatrix<f64>, step: f64) -> Option<f64> {
    let l = a.clone().cholesky()?.l();
    let x = l.solve_lower_triangular(b)?;
    let m = l.solve_lower_triangular(&x.transpose())?;
    let mut acc = 0.0;
    for mu in sym_eigen(&m).0.iter() {
        let r = step * mu;
        if !(r > -1.0) {
            return None;
        }
        acc += r.ln_1p();
    }
    Some(acc)
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = m.clone().cholesky()?;
    Some(symmetrize(&chol.inverse()))
}

/// `max(0, -lambda_min) / (1 + ||m||_F)`: how far a symmetric matrix is from the PSD cone.
pub fn psd_violation(m: &DMatrix<f64>) -> f64 {
    (-min_eigenvalue(m)).max(0.0) / (1.0 + m.norm())
}

/// Eigenvalues `phi` of the symmetric-definite pencil `det(A - phi C) = 0`,
/// sorted descending. `C` is whitened by its Cholesky factor and the reduced
/// problem `L^{-1} A L^{-T}` solved symmetrically.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("pencil right-hand matrix".into()))?
        .l();
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(c.nrows(), c.nrows()))
        .ok_or_else(|| Error::NotPositiveDefinite("pencil right-hand matrix".into()))?;
    let reduced = &l_inv * a * l_inv.transpose();
    let mut phis: Vec<f64> = sym_eigen(&reduced).0.iter().copied().collect();
    phis.reverse();
    Ok(phis)
}

/// Condition number from singular values (`inf` for exactly singular input).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.min()
}
