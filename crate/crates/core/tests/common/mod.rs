#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgka::{AlignedModel, ConditionalCov, GeneralModel, SymMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// `A A^T + floor I` with uniform entries in `A`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> SymMatrix {
    let a = uniform_rows(rng, n, n);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let dot: f64 = (0..n).map(|k| a[i][k] * a[j][k]).sum();
                    dot + if i == j { floor } else { 0.0 }
                })
                .collect()
        })
        .collect();
    SymMatrix::from_rows("random", &rows).unwrap()
}

pub fn random_general(rng: &mut ChaCha8Rng, mx: usize, my: usize, mz: usize) -> GeneralModel {
    let sx = random_spd(rng, mx, 0.5);
    let b = uniform_rows(rng, my, mx);
    let e = uniform_rows(rng, mz, mx);
    GeneralModel::from_rows(&sx.to_rows(), &b, &e).unwrap()
}

pub fn random_aligned(rng: &mut ChaCha8Rng, n: usize) -> AlignedModel {
    let sx = random_spd(rng, n, 0.5);
    let wy = random_spd(rng, n, 0.2);
    let wz = random_spd(rng, n, 0.2);
    AlignedModel::new(sx, wy, wz).unwrap()
}

/// `S^{1/2} Q diag(d) Q^T S^{1/2}` with `d` in `[lo, hi]`.
pub fn random_conditional(rng: &mut ChaCha8Rng, sigma_x: &SymMatrix, lo: f64, hi: f64) -> ConditionalCov {
    let n = sigma_x.dim();
    let half = sigma_x.sqrt().into_matrix();
    let g = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let d = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.random_range(lo..hi)));
    let m = &half * &q * d * q.transpose() * &half;
    let m = (&m + m.transpose()) * 0.5;
    ConditionalCov::new(sigma_x, SymMatrix::new("q", m).unwrap()).unwrap()
}

pub fn eq29() -> GeneralModel {
    GeneralModel::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[vec![1.0, 0.5]], &[vec![0.7, 0.35]]).unwrap()
}

pub fn eq30() -> GeneralModel {
    GeneralModel::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[vec![1.0, 0.5]], &[vec![0.5, 1.0]]).unwrap()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
