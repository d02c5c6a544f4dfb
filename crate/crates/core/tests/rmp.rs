mod common;

use optd_core::ellipsoid::duality_gap_certificate;
use optd_core::rmp::{restricted_derivatives, restricted_objective, solve_restricted, RmpConfig};
use rand::Rng;

const H: f64 = 1e-6;

#[test]
fn gradient_matches_central_differences() {
    let mut r = common::rng(11);
    for _ in 0..100 {
        let n = r.random_range(2..=10);
        let k = r.random_range(n..=30);
        let x = common::gaussian_points(&mut r, n, k);
        let idx: Vec<usize> = (0..k).collect();
        let u = common::interior_weights(&mut r, k);
        let (_, grad, _) = restricted_derivatives(&x, &idx, &u).unwrap();
        for i in 0..k {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += H;
            dn[i] -= H;
            let fd = (restricted_objective(&x, &idx, &up).unwrap() - restricted_objective(&x, &idx, &dn).unwrap()) / (2.0 * H);
            assert!((fd - grad[i]).abs() <= 1e-5 * grad[i].abs().max(1.0), "{fd} vs {}", grad[i]);
        }
    }
}

#[test]
fn hessian_matches_differenced_gradient() {
    let mut r = common::rng(12);
    for _ in 0..100 {
        let n = r.random_range(2..=10);
        let k = r.random_range(n..=30);
        let x = common::gaussian_points(&mut r, n, k);
        let idx: Vec<usize> = (0..k).collect();
        let u = common::interior_weights(&mut r, k);
        let (_, _, hess) = restricted_derivatives(&x, &idx, &u).unwrap();
        let scale = hess.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for j in 0..k {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += H;
            dn[j] -= H;
            let (_, gu, _) = restricted_derivatives(&x, &idx, &up).unwrap();
            let (_, gd, _) = restricted_derivatives(&x, &idx, &dn).unwrap();
            for i in 0..k {
                let fd = (gu[i] - gd[i]) / (2.0 * H);
                assert!((fd - hess[(i, j)]).abs() <= 1e-5 * scale.max(1.0), "({i},{j}) {fd} vs {}", hess[(i, j)]);
            }
        }
    }
}

#[test]
fn kkt_at_exit() {
    let mut r = common::rng(13);
    let cfg = RmpConfig::default();
    for _ in 0..30 {
        let n = r.random_range(2..=8);
        let k = r.random_range(n + 1..=25);
        let x = common::gaussian_points(&mut r, n, k);
        let idx: Vec<usize> = (0..k).collect();
        let sol = solve_restricted(&x, &idx, None, &cfg).unwrap();
        assert!(sol.gap <= cfg.gap_tol);
        let cert = duality_gap_certificate(&x, &sol.weights, Some(&idx)).unwrap();
        let nf = n as f64;
        assert!(cert.kappa_max - nf <= nf * ((sol.gap / nf).exp() - 1.0) + 1e-8);
        for (i, w) in sol.weights.iter() {
            assert!(w > cfg.min_weight);
            let kappa = sol.ellipsoid.mahalanobis(x.point(i));
            assert!((w * (kappa - nf)).abs() <= 1e-6);
        }
        let s: f64 = sol.weights.values().iter().sum();
        assert!((s - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn agrees_with_projected_gradient_oracle() {
    let mut r = common::rng(14);
    for _ in 0..20 {
        let n = r.random_range(2..=5);
        let k = r.random_range(n + 1..=15);
        let x = common::gaussian_points(&mut r, n, k);
        let idx: Vec<usize> = (0..k).collect();
        let sol = solve_restricted(&x, &idx, None, &RmpConfig::default()).unwrap();
        let oracle = common::projected_gradient_oracle(&x, &idx, 1e-10, 200_000);
        assert!((sol.objective - oracle).abs() <= 1e-7, "{} vs {oracle}", sol.objective);
        assert!((common::weights_log_det(&x, &sol.weights) - sol.objective).abs() <= 1e-10);
    }
}

#[test]
fn warm_start_reaches_same_optimum() {
    let mut r = common::rng(15);
    let x = common::gaussian_points(&mut r, 4, 20);
    let idx: Vec<usize> = (0..20).collect();
    let cold = solve_restricted(&x, &idx, None, &RmpConfig::default()).unwrap();
    let warm = solve_restricted(&x, &idx, Some(&cold.weights), &RmpConfig::default()).unwrap();
    assert!((cold.objective - warm.objective).abs() <= 1e-9);
}
