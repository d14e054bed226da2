mod common;

use approx::assert_relative_eq;
use common::*;
use nalgebra::{DMatrix, DVector};
use vgka::kkt::certify;
use vgka::solver::{
    ascent_boundary, ascent_boundary_general, brute_force_grid, inner_convex, sweep_boundary, AscentConfig,
    SweepParams,
};
use vgka::{asymptotic_limit, AlignedModel, ConditionalCov, Error, GeneralModel, PointStatus};

fn quad(v: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    (v * s * v.transpose())[(0, 0)]
}

/// Smallest `I_p(sigma, s)` over a rotation and eigenvalue grid of the feasible set.
fn inner_by_search(m: &GeneralModel, p: SweepParams, n: usize) -> f64 {
    let sx = m.sigma_x().matrix();
    let half = m.sigma_x().sqrt().into_matrix();
    let bb = quad(m.b(), sx);
    let ld_sx = sx.determinant().ln();
    // geometric eigenvalue grid on [1e-4, 1]
    let eig = |i: usize| 10f64.powf(-4.0 * (n - i) as f64 / n as f64);
    let mut best = f64::INFINITY;
    for k in 0..n {
        let th = std::f64::consts::PI * k as f64 / n as f64;
        let r = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        for i in 1..=n {
            for j in 1..=n {
                let d = DVector::from_vec(vec![eig(i), eig(j)]);
                let s = &half * &r * DMatrix::from_diagonal(&d) * r.transpose() * &half;
                let x = quad(m.b(), &s);
                let y = quad(m.e(), &s);
                if x > p.s || p.t * (x + 1.0) > y - x {
                    continue;
                }
                let v = 0.5 * (ld_sx - s.determinant().ln()) - 0.5 * (1.0 + bb).ln() + 0.5 * (1.0 + p.s).ln();
                best = best.min(v);
            }
        }
    }
    best
}

#[test]
fn slack_cell_keeps_sigma_x() {
    let m = eq29();
    let t_x = (1.225 - 2.5) / 3.5;
    let s = 3.0;
    let r = inner_convex(&m, SweepParams::new(s, t_x - 0.1).unwrap()).unwrap();
    assert!(r.converged);
    assert!((r.optimum.value().matrix() - m.sigma_x().matrix()).norm() < 1e-6);
    assert_relative_eq!(r.value, 0.5 * (1.0f64 + s).ln() - 0.5 * 3.5f64.ln(), epsilon = 1e-6);
}

/// Eve's row is `0.7 b`, so the key constraint reduces to a cap on
/// `x = b sigma b^T` and the optimum shrinks `sigma_x` along `b` only:
/// `|sigma| / |sigma_x| = x_max / (b sigma_x b^T)`.
fn parallel_closed_form(s: f64, t: f64) -> f64 {
    let beta = 2.5;
    let cap = s.min(-t / (0.51 + t));
    -0.5 * (cap / beta).ln() - 0.5 * (1.0 + beta).ln() + 0.5 * (1.0 + s).ln()
}

#[test]
fn inner_optimum_matches_closed_form_on_parallel_rows() {
    let m = eq29();
    for (s, t) in [(1.0, -0.2), (0.5, -0.1), (2.0, -0.3), (0.3, -0.4), (0.05, -0.01)] {
        let r = inner_convex(&m, SweepParams::new(s, t).unwrap()).unwrap();
        let want = parallel_closed_form(s, t);
        assert!((r.value - want).abs() < 1e-6, "s={s} t={t}: {} vs {want}", r.value);
    }
}

#[test]
fn inner_optimum_is_below_exhaustive_search() {
    let m = eq30();
    for (s, t) in [(1.0, 0.2), (0.5, 0.0), (2.0, 0.5)] {
        let p = SweepParams::new(s, t).unwrap();
        let r = inner_convex(&m, p).unwrap();
        let search = inner_by_search(&m, p, 200);
        assert!(r.value <= search + 1e-9, "solver {} above search {}", r.value, search);
        assert!(search - r.value < 2e-2, "s={s} t={t}: solver {} search {}", r.value, search);
    }
}

#[test]
fn impossible_target_is_infeasible() {
    let m = eq29();
    let err = inner_convex(&m, SweepParams::new(1.0, 50.0).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Infeasible { .. }), "{err:?}");
}

#[test]
fn sweep_params_reject_out_of_range() {
    assert!(SweepParams::new(-1.0, 0.0).is_err());
    assert!(SweepParams::new(1.0, -1.5).is_err());
}

#[test]
fn sweep_is_monotone_bounded_and_dominates_grid() {
    let m = eq29();
    let rp = linspace(0.0, 6.0, 13);
    let s = sweep_boundary(&m, &rp, 60).unwrap();
    let g = brute_force_grid(&m, &rp, 60).unwrap();
    let lim = asymptotic_limit(&m);
    assert_eq!(s.points[0].rk, 0.0);
    assert!(s.is_monotone() && g.is_monotone());
    for (a, b) in s.points.iter().zip(&g.points) {
        assert!(a.rk <= lim + 1e-12);
        assert!(b.rk <= a.rk + 1e-9, "grid {} above sweep {} at {}", b.rk, a.rk, a.rp);
        assert!(a.rk - b.rk < 1e-2);
    }
    // the first sampled rp of the spec example lies between the 0.5 grid rows
    let half = sweep_boundary(&m, &[0.5], 60).unwrap().points[0].rk;
    let half_grid = brute_force_grid(&m, &[0.5], 60).unwrap().points[0].rk;
    assert!(half_grid <= half + 1e-9 && half - half_grid < 1e-2);
}

#[test]
fn sweep_rejects_unsorted_grid() {
    assert!(sweep_boundary(&eq29(), &[1.0, 0.5], 20).is_err());
}

#[test]
fn equal_observations_give_zero_boundary() {
    let m = eq29();
    let same = GeneralModel::new(m.sigma_x().clone(), m.b().clone(), m.b().clone()).unwrap();
    let rp = [0.0, 1.0, 5.0];
    for b in [sweep_boundary(&same, &rp, 30).unwrap(), brute_force_grid(&same, &rp, 30).unwrap()] {
        assert!(b.points.iter().all(|p| p.rk.abs() < 1e-12), "{:?}", b.points);
    }
}

#[test]
fn grid_includes_the_corner() {
    let m = eq29();
    let g = brute_force_grid(&m, &[0.0], 10).unwrap();
    assert_eq!(g.points[0].rk, 0.0);
    assert!((g.solver_meta[0].sigma_star.matrix() - m.sigma_x().matrix()).norm() < 1e-12);
}

#[test]
fn grid_rejects_large_dimension() {
    let m = random_general(&mut rng(1), 3, 1, 1);
    assert!(matches!(brute_force_grid(&m, &[1.0], 10), Err(Error::DimensionTooLarge(3))));
}

#[test]
fn sweep_and_ascent_agree() {
    let m = eq29();
    let rp = [0.0, 0.5, 1.0, 2.0, 4.0];
    let s = sweep_boundary(&m, &rp, 60).unwrap();
    let a = ascent_boundary_general(&m, &rp, &AscentConfig::default()).unwrap();
    for (x, y) in s.points.iter().zip(&a.points) {
        assert!((x.rk - y.rk).abs() < 1e-3, "rp {}: sweep {} ascent {}", x.rp, x.rk, y.rk);
    }
}

/// Scalar degraded model: `I_k` grows as `q` shrinks, so the optimum makes
/// the rate constraint tight and `q*` is found by bisection on `I_p(q) = rp`.
fn scalar_oracle(sx: f64, wy: f64, wz: f64, rp: f64) -> f64 {
    let ip = |q: f64| 0.5 * (sx / q).ln() - 0.5 * ((sx + wy) / (q + wy)).ln();
    let ik = |q: f64| 0.5 * ((sx + wy) / (q + wy)).ln() - 0.5 * ((sx + wz) / (q + wz)).ln();
    let (mut lo, mut hi) = (1e-300f64, sx);
    for _ in 0..2000 {
        let mid = (lo * hi).sqrt();
        if ip(mid) > rp {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-15 {
            break;
        }
    }
    ik(hi)
}

#[test]
fn ascent_matches_scalar_closed_form() {
    let m = AlignedModel::from_rows(&[vec![2.0]], &[vec![0.5]], &[vec![1.5]]).unwrap();
    let rp = [0.0, 0.2, 0.7, 1.5, 3.0];
    let b = ascent_boundary(&m, &rp).unwrap();
    for p in &b.points {
        let want = scalar_oracle(2.0, 0.5, 1.5, p.rp);
        assert!((p.rk - want).abs() < 1e-6, "rp {}: {} vs {}", p.rp, p.rk, want);
    }
}

#[test]
fn ascent_on_random_degraded_models_matches_grid_and_certifies() {
    let mut r = rng(31);
    let rp = [0.0, 0.3, 1.0, 2.5];
    for _ in 0..4 {
        let a = random_aligned(&mut r, 2);
        let wz = a.sigma_wy() + a.sigma_wz();
        let m = AlignedModel::new(a.sigma_x().clone(), a.sigma_wy().clone(), wz).unwrap();
        let asc = ascent_boundary(&m, &rp).unwrap();
        let grid = brute_force_grid(&m.to_general(), &rp, 60).unwrap();
        for ((p, g), meta) in asc.points.iter().zip(&grid.points).zip(&asc.solver_meta) {
            assert!((p.rk - g.rk).abs() < 1e-2, "rp {}: ascent {} grid {}", p.rp, p.rk, g.rk);
            if meta.status == PointStatus::Converged {
                let q = ConditionalCov::new(m.sigma_x(), meta.sigma_star.clone()).unwrap();
                let cert = certify(&m, &q, p.rp).unwrap();
                assert!(cert.is_valid(), "rp {}: {:?}", p.rp, cert.residuals);
            }
        }
    }
}

#[test]
fn ascent_corner_at_zero_rate() {
    let m = random_aligned(&mut rng(32), 2);
    let b = ascent_boundary(&m, &[0.0]).unwrap();
    assert!((b.solver_meta[0].sigma_star.matrix() - m.sigma_x().matrix()).norm() < 1e-6);
    assert_eq!(b.points[0].rk, 0.0);
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let m = eq30();
    let rp = [0.0, 0.7, 2.0];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep_boundary(&m, &rp, 30).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
}

#[test]
fn general_model_sigma_star_stays_in_interval() {
    let m = eq30();
    let b = sweep_boundary(&m, &[0.5, 1.5], 40).unwrap();
    for meta in &b.solver_meta {
        let gap = m.sigma_x() - &meta.sigma_star;
        assert!(gap.min_eigenvalue() > -1e-10);
        assert!(meta.sigma_star.min_eigenvalue() > 0.0);
    }
}
