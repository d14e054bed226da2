use nalgebra::{DMatrix, DVector};

use crate::channel::InfoForm;
use crate::linalg::{log_det_ratio, log_det_spd, spd_inverse, SymMatrix};

/// Coordinates of the symmetric matrices of order `m`.
#[derive(Debug, Clone)]
pub(crate) struct SymBasis {
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl SymBasis {
    pub fn new(m: usize) -> Self {
        let mut pairs: Vec<(usize, usize)> = (0..m).map(|i| (i, i)).collect();
        for i in 0..m {
            for j in (i + 1)..m {
                pairs.push((i, j));
            }
        }
        Self { m, pairs }
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn to_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.m, self.m);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            d[(i, j)] = x[k];
            d[(j, i)] = x[k];
        }
        d
    }

    pub fn to_coords(&self, d: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            self.pairs.iter().map(|&(i, j)| 0.5 * (d[(i, j)] + d[(j, i)])),
        )
    }

    /// `<G, E_a>` for every basis element.
    pub fn grad(&self, g: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            self.pairs.iter().map(|&(i, j)| if i == j { g[(i, i)] } else { g[(i, j)] + g[(j, i)] }),
        )
    }

    /// Change of coordinates that normalizes the Hessian of
    /// `-log|D| - log|I - D|` at `d`: in the eigenbasis of `d`, entry `(i, j)`
    /// is scaled by `h_ij^{-1/2}` with `h_ij = 1/(d_i d_j) + 1/((1-d_i)(1-d_j))`.
    /// Near-singular iterates otherwise give Hessians too ill-conditioned to
    /// factor.
    pub fn interval_scaling(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let (vals, vecs) = crate::linalg::sym_eigen(d);
        let n = self.n();
        let c = DMatrix::from_fn(self.m, self.m, |i, j| {
            let (a, b) = (vals[i].clamp(1e-300, 1.0), vals[j].clamp(1e-300, 1.0));
            let h = 1.0 / (a * b) + 1.0 / ((1.0 - a).max(1e-300) * (1.0 - b).max(1e-300));
            1.0 / h.sqrt()
        });
        let mut t = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            let y = self.to_matrix(&e).component_mul(&c);
            t.set_column(k, &self.to_coords(&(&vecs * y * vecs.transpose())));
        }
        t
    }

    fn units(&self, k: usize) -> ([(usize, usize); 2], usize) {
        let (i, j) = self.pairs[k];
        if i == j {
            ([(i, i), (i, i)], 1)
        } else {
            ([(i, j), (j, i)], 2)
        }
    }

    /// `tr(G E_a H E_b)` for all basis pairs.
    pub fn hess(&self, g: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            let (ua, na) = self.units(a);
            for b in a..n {
                let (ub, nb) = self.units(b);
                let mut acc = 0.0;
                for &(p, q) in &ua[..na] {
                    for &(r, s) in &ub[..nb] {
                        acc += g[(s, p)] * h[(q, r)];
                    }
                }
                out[(a, b)] = acc;
                out[(b, a)] = acc;
            }
        }
        out
    }
}

/// Value, gradient and Hessian of a scalar function of `D`.
#[derive(Debug, Clone)]
pub(crate) struct Taylor {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Taylor {
    pub fn zero(n: usize) -> Self {
        Self { value: 0.0, grad: DVector::zeros(n), hess: DMatrix::zeros(n, n) }
    }

    pub fn add_scaled(&mut self, k: f64, other: &Taylor) {
        self.value += k * other.value;
        self.grad += &other.grad * k;
        self.hess += &other.hess * k;
    }
}

/// Whitened model: `F_y S`, `F_z S` and the coordinate basis.
#[derive(Debug, Clone)]
pub(crate) struct Whitened {
    pub basis: SymBasis,
    pub m: usize,
    s_half: DMatrix<f64>,
    pub fy: DMatrix<f64>,
    pub fz: DMatrix<f64>,
    phi_y_at_identity: f64,
    phi_z_at_identity: f64,
}

impl Whitened {
    pub fn new(info: &InfoForm) -> Self {
        let s = info.sigma_x().sqrt().into_matrix();
        let m = s.nrows();
        let fy = info.factor_y() * &s;
        let fz = info.factor_z() * &s;
        let id = DMatrix::identity(m, m);
        let phi_y_at_identity = 0.5 * obs_ld(&fy, &id).unwrap();
        let phi_z_at_identity = 0.5 * obs_ld(&fz, &id).unwrap();
        Self {
            basis: SymBasis::new(m),
            m,
            s_half: s,
            fy,
            fz,
            phi_y_at_identity,
            phi_z_at_identity,
        }
    }

    pub fn unwhiten(&self, d: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::from_raw(&self.s_half * d * &self.s_half)
    }

    /// `(I_p, I_k)` at whitened `D`; `None` if `D` is not PD.
    pub fn rates(&self, d: &DMatrix<f64>) -> Option<(f64, f64)> {
        let ld = log_det_spd(d)?;
        let py = 0.5 * obs_ld(&self.fy, d)?;
        let pz = 0.5 * obs_ld(&self.fz, d)?;
        let ip = -0.5 * ld + py - self.phi_y_at_identity;
        let ik = self.phi_y_at_identity - py + pz - self.phi_z_at_identity;
        Some((ip, ik))
    }

    /// Change of `(I_p, I_k)` from `d` to `d + step dd`, free of the
    /// cancellation in differencing two evaluations.
    pub fn rates_delta(&self, d: &DMatrix<f64>, dd: &DMatrix<f64>, step: f64) -> Option<(f64, f64)> {
        let ld = log_det_ratio(d, dd, step)?;
        let py = obs_delta(&self.fy, d, dd, step)?;
        let pz = obs_delta(&self.fz, d, dd, step)?;
        Some((-0.5 * ld + py, -py + pz))
    }

    /// `log|D|` with derivatives.
    pub fn log_det(&self, d: &DMatrix<f64>) -> Option<Taylor> {
        let value = log_det_spd(d)?;
        let inv = spd_inverse(d)?;
        Some(Taylor { value, grad: self.basis.grad(&inv), hess: -self.basis.hess(&inv, &inv) })
    }

    /// `log|I - D|` with derivatives.
    pub fn log_det_complement(&self, d: &DMatrix<f64>) -> Option<Taylor> {
        let c = DMatrix::identity(self.m, self.m) - d;
        let value = log_det_spd(&c)?;
        let inv = spd_inverse(&c)?;
        Some(Taylor { value, grad: -self.basis.grad(&inv), hess: -self.basis.hess(&inv, &inv) })
    }

    /// `1/2 log|I + F D F^T|` with derivatives.
    pub fn obs_term(&self, f: &DMatrix<f64>, d: &DMatrix<f64>) -> Option<Taylor> {
        let k = f.nrows();
        let inner = f * d * f.transpose() + DMatrix::identity(k, k);
        let value = 0.5 * log_det_spd(&inner)?;
        let g = f.transpose() * spd_inverse(&inner)? * f;
        Some(Taylor { value, grad: self.basis.grad(&g) * 0.5, hess: -self.basis.hess(&g, &g) * 0.5 })
    }

    /// `I_p(D)` with derivatives.
    pub fn ip_taylor(&self, d: &DMatrix<f64>) -> Option<Taylor> {
        let mut t = Taylor::zero(self.basis.n());
        t.add_scaled(-0.5, &self.log_det(d)?);
        t.add_scaled(1.0, &self.obs_term(&self.fy, d)?);
        t.value -= self.phi_y_at_identity;
        Some(t)
    }

    /// `I_k(D)` with derivatives.
    pub fn ik_taylor(&self, d: &DMatrix<f64>) -> Option<Taylor> {
        let mut t = Taylor::zero(self.basis.n());
        t.add_scaled(-1.0, &self.obs_term(&self.fy, d)?);
        t.add_scaled(1.0, &self.obs_term(&self.fz, d)?);
        t.value += self.phi_y_at_identity - self.phi_z_at_identity;
        Some(t)
    }
}

/// Change of `1/2 log|I + F D F^T|` along `dd`.
fn obs_delta(f: &DMatrix<f64>, d: &DMatrix<f64>, dd: &DMatrix<f64>, step: f64) -> Option<f64> {
    let k = f.nrows();
    let inner = f * d * f.transpose() + DMatrix::identity(k, k);
    Some(0.5 * log_det_ratio(&inner, &(f * dd * f.transpose()), step)?)
}

fn obs_ld(f: &DMatrix<f64>, d: &DMatrix<f64>) -> Option<f64> {
    let k = f.nrows();
    log_det_spd(&(f * d * f.transpose() + DMatrix::identity(k, k)))
}
