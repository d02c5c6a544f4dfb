#![allow(dead_code)]

use nalgebra::DMatrix;
use optd_core::{DesignMatrix, DesignWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_points(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DesignMatrix {
    let data: Vec<f64> = (0..n * m).map(|_| StandardNormal.sample(rng)).collect();
    DesignMatrix::new(n, data, None).unwrap()
}

/// Positive weights on every point, normalized.
pub fn interior_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = u.iter().sum();
    u.iter_mut().for_each(|v| *v /= s);
    u
}

/// `sum_i u_i x_i x_i^T` built directly.
pub fn information(x: &DesignMatrix, idx: &[usize], u: &[f64]) -> DMatrix<f64> {
    let n = x.n();
    let mut m = DMatrix::zeros(n, n);
    for (&i, &w) in idx.iter().zip(u) {
        let p = DMatrix::from_column_slice(n, 1, x.point(i));
        m += &p * p.transpose() * w;
    }
    m
}

/// `ln det` via nalgebra's Cholesky; `-inf` when not positive definite.
pub fn log_det(m: &DMatrix<f64>) -> f64 {
    match m.clone().cholesky() {
        Some(c) => 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

pub fn weights_log_det(x: &DesignMatrix, w: &DesignWeights) -> f64 {
    log_det(&information(x, w.support(), w.values()))
}

/// Full-set `max_i x_i^T M^{-1} x_i` for the weights `w`, by dense inversion.
pub fn kappa_max(x: &DesignMatrix, w: &DesignWeights) -> f64 {
    let h = information(x, w.support(), w.values()).try_inverse().unwrap();
    x.points()
        .map(|p| {
            let v = nalgebra::DVector::from_column_slice(p);
            (v.transpose() * &h * &v)[(0, 0)]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in s.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k as f64 + 1.0);
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projected-gradient ascent on `ln det(sum u_i x_i x_i^T)` over the simplex
/// with Armijo backtracking. Returns the final objective.
pub fn projected_gradient_oracle(x: &DesignMatrix, idx: &[usize], stationarity: f64, max_iter: usize) -> f64 {
    let k = idx.len();
    let mut u = vec![1.0 / k as f64; k];
    let mut f = log_det(&information(x, idx, &u));
    let mut step = 1.0;
    for _ in 0..max_iter {
        let h = information(x, idx, &u).try_inverse().unwrap();
        let grad: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let v = nalgebra::DVector::from_column_slice(x.point(i));
                (v.transpose() * &h * &v)[(0, 0)]
            })
            .collect();
        let probe = project_simplex(&u.iter().zip(&grad).map(|(a, g)| a + g).collect::<Vec<_>>());
        let res = probe.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if res <= stationarity {
            break;
        }
        step = (step * 2.0f64).min(1e6);
        loop {
            let cand = project_simplex(&u.iter().zip(&grad).map(|(a, g)| a + step * g).collect::<Vec<_>>());
            let fc = log_det(&information(x, idx, &cand));
            let lin: f64 = cand.iter().zip(&u).zip(&grad).map(|((c, a), g)| g * (c - a)).sum();
            if fc.is_finite() && fc >= f + 1e-4 * lin {
                u = cand;
                f = fc;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return f;
            }
        }
    }
    f
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Calls `f` on every multiplicity vector over `k` items summing to `total`.
pub fn for_each_multiset(k: usize, total: usize, f: &mut impl FnMut(&[u32])) {
    fn rec(pos: usize, left: usize, cur: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
        if pos + 1 == cur.len() {
            cur[pos] = left as u32;
            f(cur);
            cur[pos] = 0;
            return;
        }
        for c in 0..=left {
            cur[pos] = c as u32;
            rec(pos + 1, left - c, cur, f);
        }
        cur[pos] = 0;
    }
    let mut cur = vec![0u32; k];
    rec(0, total, &mut cur, f);
}
