mod common;

use approx::assert_relative_eq;
use common::*;
use nalgebra::DMatrix;
use vgka::kkt::{
    certify, change_of_variable, change_of_variable_info, coefficients_by_block_inverse, enhance,
    extremal_violation, k_yx_closed_form, recover_multipliers, verify_certificate, KktCertificate,
};
use vgka::solver::{ascent_boundary, sweep_boundary};
use vgka::{rates_aligned, AlignedModel, ConditionalCov, Error, PointStatus, SymMatrix};

fn degraded(seed: u64) -> AlignedModel {
    let a = random_aligned(&mut rng(seed), 2);
    let wz = a.sigma_wy() + a.sigma_wz();
    AlignedModel::new(a.sigma_x().clone(), a.sigma_wy().clone(), wz).unwrap()
}

/// Certified optima of a few degraded models on a rate grid.
fn optima() -> Vec<(AlignedModel, ConditionalCov, KktCertificate)> {
    let mut out = Vec::new();
    for seed in 40..44 {
        let m = degraded(seed);
        let b = ascent_boundary(&m, &[0.3, 0.8, 1.5]).unwrap();
        for (p, meta) in b.points.iter().zip(&b.solver_meta) {
            if meta.status != PointStatus::Converged {
                continue;
            }
            let q = ConditionalCov::new(m.sigma_x(), meta.sigma_star.clone()).unwrap();
            let cert = certify(&m, &q, p.rp).unwrap();
            out.push((m.clone(), q, cert));
        }
    }
    assert!(out.len() >= 8, "only {} converged points", out.len());
    out
}

fn det_root(a: &DMatrix<f64>) -> f64 {
    a.determinant().powf(1.0 / a.nrows() as f64)
}

#[test]
fn ascent_optima_certify() {
    for (_, _, cert) in optima() {
        assert!(cert.is_valid(), "{:?}", cert.residuals);
        assert!(cert.mu > 0.0);
        assert!(cert.wy_tilde.is_some());
    }
}

#[test]
fn wrong_multiplier_breaks_stationarity() {
    let (m, _, cert) = optima().remove(0);
    let mut bad = cert.clone();
    bad.mu *= 1.1;
    let r = verify_certificate(&m, &bad);
    assert!(r.stationarity > 1e-3 * cert.mu.min(1.0), "{r:?}");
    assert!(r.max() > cert.residuals.max());
}

#[test]
fn interior_point_has_no_multiplier() {
    let m = degraded(45);
    let q = ConditionalCov::new(m.sigma_x(), m.sigma_x().scale(0.5)).unwrap();
    let rp = rates_aligned(&m, &q).unwrap().rp;
    match recover_multipliers(&m, &q, rp) {
        Err(Error::NoValidMultiplier(res)) => assert!(res > 1e-6),
        other => panic!("expected NoValidMultiplier, got {other:?}"),
    }
    assert!(matches!(certify(&m, &q, rp), Err(Error::NoValidMultiplier(_))));
}

#[test]
fn zero_multiplier_has_no_change_of_variable() {
    let (m, q, cert) = optima().remove(0);
    let wt = cert.wy_tilde.unwrap();
    assert_eq!(change_of_variable(&m, &wt, &q, 0.0).unwrap_err(), Error::MuZero);
    let p = wt.inverse().unwrap();
    assert_eq!(change_of_variable_info(&m, &p, q.value(), 0.0).unwrap_err(), Error::MuZero);
}

#[test]
fn enhancement_with_zero_slack_multiplier_keeps_bob_noise() {
    let (m, q, cert) = optima().remove(0);
    let zero = SymMatrix::from_diagonal(&[0.0, 0.0]);
    let wt = enhance(&m, &q, cert.mu, &zero).unwrap();
    assert!((wt.matrix() - m.sigma_wy().matrix()).norm() < 1e-12);
}

#[test]
fn coefficient_routes_agree() {
    for (m, q, cert) in optima() {
        let wt = cert.wy_tilde.clone().unwrap();
        let cv = change_of_variable(&m, &wt, &q, cert.mu).unwrap();
        let (k_yz, k_yx) = coefficients_by_block_inverse(&m, &wt).unwrap();
        let closed = k_yx_closed_form(&m, &wt).unwrap();
        let scale = 1.0 + k_yx.norm();
        assert!((&k_yx - &closed).norm() < 1e-8 * scale, "{k_yx} vs {closed}");
        assert!((&k_yx - &cv.k_yx).norm() < 1e-8 * scale);
        // Z is carried in X coordinates, so Bob's Z coefficient is W~ P_z
        assert!((&k_yz - &cv.k_yz).norm() < 1e-8 * (1.0 + k_yz.norm()));
    }
}

#[test]
fn scalar_coefficient_is_noise_ratio() {
    for (sx, wy, wz, frac) in [(2.0, 0.5, 1.5, 0.5), (1.0, 0.2, 3.0, 0.9), (5.0, 1.0, 1.1, 0.1)] {
        let m = AlignedModel::from_rows(&[vec![sx]], &[vec![wy]], &[vec![wz]]).unwrap();
        let wt = SymMatrix::from_diagonal(&[wy + frac * (wz - wy)]);
        let want = 1.0 - wt.matrix()[(0, 0)] / wz;
        assert_relative_eq!(k_yx_closed_form(&m, &wt).unwrap()[(0, 0)], want, epsilon = 1e-12);
        assert_relative_eq!(coefficients_by_block_inverse(&m, &wt).unwrap().1[(0, 0)], want, epsilon = 1e-12);
    }
}

#[test]
fn third_noise_matches_direct_product() {
    for (m, q, cert) in optima() {
        let wt = cert.wy_tilde.clone().unwrap();
        let cv = change_of_variable(&m, &wt, &q, cert.mu).unwrap();
        let k_inv = cv.k_yx.clone().try_inverse().unwrap();
        let direct = &k_inv * cv.sigma_n2.matrix() * k_inv.transpose();
        let rel = (&direct - cv.sigma_n3.matrix()).norm() / direct.norm();
        assert!(rel < 1e-8, "mu {}: rel {rel}", cert.mu);
    }
}

#[test]
fn certified_noise_is_proportional_and_equalizes_minkowski() {
    for (m, q, cert) in optima() {
        let wt = cert.wy_tilde.clone().unwrap();
        let cv = change_of_variable(&m, &wt, &q, cert.mu).unwrap();
        let a = cv.sigma_xuz.matrix();
        let b = cv.sigma_n3.matrix();
        let want = a * (cv.gamma - 1.0);
        assert!((b - &want).norm() < 1e-6 * (1.0 + want.norm()), "{b} vs {want}");
        let lhs = det_root(a) + det_root(b);
        let rhs = det_root(&(a + b));
        assert!(((lhs - rhs) / rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }
}

#[test]
fn enhanced_noise_sits_between_both_noises() {
    for (m, _, cert) in optima() {
        let wt = cert.wy_tilde.clone().unwrap();
        assert!((m.sigma_wy() - &wt).min_eigenvalue() > -1e-8);
        assert!((m.sigma_wz() - &wt).min_eigenvalue() > -1e-8);
        assert!(cert.residuals.order_wy < 1e-8 && cert.residuals.order_wz < 1e-8);
    }
}

#[test]
fn certified_point_is_extremal() {
    for (m, _, cert) in optima().into_iter().take(4) {
        let v = extremal_violation(&m, &cert, 500, 7);
        assert!(v <= 1e-8, "violation {v}");
    }
}

#[test]
fn general_model_optimum_certifies() {
    let m = eq30();
    let b = sweep_boundary(&m, &[1.0], 60).unwrap();
    let meta = &b.solver_meta[0];
    assert_eq!(meta.status, PointStatus::Converged);
    let q = ConditionalCov::new(m.sigma_x(), meta.sigma_star.clone()).unwrap();
    let cert = certify(&m, &q, 1.0).unwrap();
    assert!(cert.is_valid(), "{:?}", cert.residuals);
}

#[test]
fn certificate_serializes_with_named_residuals() {
    let (_, _, cert) = optima().remove(0);
    let v = serde_json::to_value(&cert).unwrap();
    let keys: Vec<&str> = v["residuals"].as_object().unwrap().keys().map(String::as_str).collect();
    assert!(keys.contains(&"compl_slack_M"));
    assert_eq!(keys.len(), 10);
    let back: KktCertificate = serde_json::from_value(v).unwrap();
    assert_eq!(back, cert);
}
