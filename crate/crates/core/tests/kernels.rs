mod common;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use optd_core::ellipsoid::{duality_gap_certificate, ellipsoid_from_weights, info_matrix, mahalanobis};
use optd_core::exact_design::ExactDesign;
use optd_core::{DesignMatrix, DesignWeights, EllipsoidMatrix};
use proptest::prelude::*;
use rand::Rng;

fn instance(seed: u64, n: usize, m: usize) -> (DesignMatrix, DesignWeights) {
    let mut r = common::rng(seed);
    let x = common::gaussian_points(&mut r, n, m);
    let u = common::interior_weights(&mut r, m);
    (x, DesignWeights::from_dense(&u).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mahalanobis_is_nonnegative(seed in any::<u64>(), n in 2usize..8) {
        let mut r = common::rng(seed);
        let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let h = EllipsoidMatrix::new(&a * a.transpose() + DMatrix::identity(n, n) * 0.1).unwrap();
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        prop_assert!(mahalanobis(&h, &x) > 0.0);
        prop_assert_eq!(mahalanobis(&h, &vec![0.0; n]), 0.0);
    }

    #[test]
    fn ellipsoid_round_trip(seed in any::<u64>(), n in 2usize..50) {
        let (x, u) = instance(seed, n, n + 5);
        let h = ellipsoid_from_weights(&x, &u).unwrap();
        let m = info_matrix(&x, &u);
        let back = h.matrix().clone().try_inverse().unwrap();
        prop_assert!((&back - &m).norm() <= 1e-8 * m.norm());
    }

    #[test]
    fn trace_identity(seed in any::<u64>(), n in 2usize..12, extra in 0usize..20) {
        let (x, u) = instance(seed, n, n + extra);
        let h = ellipsoid_from_weights(&x, &u).unwrap();
        let t = (h.matrix() * info_matrix(&x, &u)).trace();
        prop_assert!((t - n as f64).abs() <= 1e-8);
    }

    #[test]
    fn gap_is_nonnegative(seed in any::<u64>(), n in 2usize..10, extra in 0usize..30) {
        let (x, u) = instance(seed, n, n + extra);
        let c = duality_gap_certificate(&x, &u, None).unwrap();
        prop_assert!(c.gap >= 0.0);
        prop_assert!(c.kappa_max >= n as f64 - 1e-9);
    }
}

#[test]
fn swap_ratios_match_cholesky_over_1000_swaps() {
    let mut r = common::rng(2024);
    let mut done = 0;
    while done < 1000 {
        let n = r.random_range(2..=10);
        let m = 3 * n;
        let x = common::gaussian_points(&mut r, n, m);
        let mut d = ExactDesign::from_counts(&x, (0..2 * n).map(|i| (i, 1))).unwrap();
        for _ in 0..20 {
            let idx = d.indices();
            let i = idx[r.random_range(0..idx.len())];
            let j = r.random_range(0..m);
            let before = common::log_det(d.information());
            let predicted = d.swap_ratio(&x, i, j);
            if predicted < 1e-3 {
                continue;
            }
            d.swap_update(&x, i, j).unwrap();
            let direct = {
                let counts: Vec<(usize, f64)> = d.counts().iter().map(|(&a, &c)| (a, c as f64)).collect();
                let (idx, w): (Vec<usize>, Vec<f64>) = counts.into_iter().unzip();
                common::log_det(&common::information(&x, &idx, &w))
            };
            let actual = (direct - before).exp();
            assert!((predicted - actual).abs() <= 1e-10 * actual, "{predicted} vs {actual}");
            assert!((d.log_det() - direct).abs() <= 1e-9 * direct.abs().max(1.0));
            done += 1;
        }
    }
}

#[test]
fn certificate_examples() {
    let x = DesignMatrix::from_points(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let half = DesignWeights::uniform(3, &[0, 1]).unwrap();
    let c = duality_gap_certificate(&x, &half, None).unwrap();
    assert_relative_eq!(c.kappa_max, 4.0, epsilon = 1e-12);
    assert_relative_eq!(c.gap, 2.0 * 2f64.ln(), epsilon = 1e-12);
    let third = DesignWeights::uniform(3, &[0, 1, 2]).unwrap();
    assert!(duality_gap_certificate(&x, &third, None).unwrap().gap < 1e-12);
}
