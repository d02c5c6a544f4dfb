//! Restricted master problem: maximize `ln det(X U X^T)` over the simplex on
//! a small index subset, to a certified duality gap.
//!
//! The solver is a primal log-barrier method on the weights. For fixed `mu`
//! it maximizes
//!
//! ```text
//!     f(u) = ln det(X U X^T) + mu * sum_i ln u_i     s.t.  sum_i u_i = 1
//! ```
//!
//! by equality-constrained Newton steps. The gradient of `ln det` is
//! `kappa_i = x_i^T H x_i` and its Hessian is `-(x_i^T H x_j)^2` with
//! `H = (X U X^T)^{-1}`. The Newton system is solved in the scaled variables
//! `u_i * d_i`, where its matrix becomes `D (K o K) D + mu I`, which stays
//! well conditioned while inactive weights go to zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, DesignWeights};
use crate::ellipsoid::{self, EllipsoidMatrix};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmpConfig {
    /// Target certified duality gap on the subset.
    pub gap_tol: f64,
    pub max_newton: usize,
    /// Barrier reduction factor applied once the iterate is centred.
    pub barrier_shrink: f64,
    /// Weights at or below this are truncated to zero on extraction.
    pub min_weight: f64,
}

impl Default for RmpConfig {
    fn default() -> Self {
        RmpConfig { gap_tol: 1e-9, max_newton: 200, barrier_shrink: 0.2, min_weight: 1e-9 }
    }
}

impl RmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0) {
            return Err(Error::InvalidInput("gap_tol must be positive".into()));
        }
        if !(self.barrier_shrink > 0.0 && self.barrier_shrink < 1.0) {
            return Err(Error::InvalidInput("barrier_shrink must lie in (0, 1)".into()));
        }
        if !(self.min_weight >= 0.0) {
            return Err(Error::InvalidInput("min_weight must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RmpSolution {
    /// Full-length weights, zero outside the subset support.
    pub weights: DesignWeights,
    pub ellipsoid: EllipsoidMatrix,
    /// `ln det(X U X^T)` at `weights`.
    pub objective: f64,
    /// Certified gap over the subset.
    pub gap: f64,
    pub newton_iters: usize,
}

const WARM_FLOOR: f64 = 1e-6;
const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const FRACTION_TO_BOUNDARY: f64 = 0.99;
/// Gap below which a barrier-free Newton polish on the apparent support is tried.
const POLISH_GAP: f64 = 1e-4;
const POLISH_STEPS: usize = 30;

/// Barrier state at one iterate.
struct Eval {
    log_det: f64,
    /// `K = X_s^T H X_s`
    k: DMatrix<f64>,
}

impl Eval {
    fn at(x: &DesignMatrix, idx: &[usize], u: &[f64]) -> Option<Eval> {
        let n = x.n();
        let mut info = DMatrix::zeros(n, n);
        for (&i, &w) in idx.iter().zip(u) {
            linalg::add_outer(&mut info, x.point(i), w);
        }
        linalg::symmetrize(&mut info);
        let l = linalg::cholesky(&info)?;
        // Y = L^{-1} X_s, so K = Y^T Y
        let kk = idx.len();
        let mut y = DMatrix::zeros(n, kk);
        let mut col = vec![0.0; n];
        for (c, &i) in idx.iter().enumerate() {
            col.copy_from_slice(x.point(i));
            linalg::forward_subst(&l, &mut col);
            y.column_mut(c).copy_from_slice(&col);
        }
        let k = y.transpose() * &y;
        Some(Eval { log_det: linalg::log_det(&l), k })
    }

    fn kappa(&self, a: usize) -> f64 {
        self.k[(a, a)]
    }

    fn gap(&self, n: usize) -> f64 {
        let kmax = (0..self.k.nrows()).map(|a| self.kappa(a)).fold(f64::NEG_INFINITY, f64::max);
        ellipsoid::gap_from_kappa(kmax, n)
    }
}

fn barrier_value(ev: &Eval, u: &[f64], mu: f64) -> f64 {
    ev.log_det + mu * u.iter().map(|v| v.ln()).sum::<f64>()
}

/// `ln det(X U X^T)` for weights `u` aligned with `subset`.
pub fn restricted_objective(x: &DesignMatrix, subset: &[usize], u: &[f64]) -> Result<f64> {
    Eval::at(x, subset, u).map(|e| e.log_det).ok_or(Error::SingularInformation)
}

/// Value, gradient (`kappa_i`) and Hessian (`-(x_i^T H x_j)^2`) of
/// `ln det(X U X^T)` with respect to the subset weights.
pub fn restricted_derivatives(
    x: &DesignMatrix,
    subset: &[usize],
    u: &[f64],
) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
    let ev = Eval::at(x, subset, u).ok_or(Error::SingularInformation)?;
    let grad = (0..subset.len()).map(|a| ev.kappa(a)).collect();
    let hess = ev.k.map(|v| -v * v);
    Ok((ev.log_det, grad, hess))
}

fn subset_spans(x: &DesignMatrix, idx: &[usize]) -> bool {
    if idx.len() < x.n() {
        return false;
    }
    let mut g = DMatrix::zeros(x.n(), x.n());
    for &i in idx {
        linalg::add_outer(&mut g, x.point(i), 1.0);
    }
    linalg::cholesky(&g).is_some()
}

/// Solves the restricted pair on `subset` to a certified gap of `cfg.gap_tol`.
///
/// Warm-start weights are clamped to at least `1e-6` on the subset and
/// renormalized; the barrier then starts at `max(1e-4, gap / |subset|)`.
pub fn solve_restricted(
    x: &DesignMatrix,
    subset: &[usize],
    warm_start: Option<&DesignWeights>,
    cfg: &RmpConfig,
) -> Result<RmpSolution> {
    cfg.validate()?;
    let mut idx = subset.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if idx.last().is_some_and(|&i| i >= x.m()) {
        return Err(Error::InvalidInput("subset index out of range".into()));
    }
    if !subset_spans(x, &idx) {
        return Err(Error::SubsetRankDeficient);
    }
    let n = x.n();
    let k = idx.len();

    let mut u: Vec<f64> = match warm_start {
        Some(w) => idx.iter().map(|&i| w.get(i).max(WARM_FLOOR)).collect(),
        None => vec![1.0; k],
    };
    let s: f64 = u.iter().sum();
    u.iter_mut().for_each(|v| *v /= s);

    let mut ev = Eval::at(x, &idx, &u).ok_or(Error::SubsetRankDeficient)?;
    let mut mu = (ev.gap(n) / k as f64).max(1e-4);
    let mut target = 0.5 * cfg.gap_tol;
    let mut iters = 0usize;
    let mut passes = 0usize;

    loop {
        passes += 1;
        if ev.gap(n) <= target {
            let sol = finish(x, &idx, &u, cfg, iters)?;
            if sol.gap <= cfg.gap_tol {
                return Ok(sol);
            }
            // truncation cost us the certificate; tighten and keep going
            target *= 0.1;
            mu *= cfg.barrier_shrink;
        }
        if iters >= cfg.max_newton || passes > 4 * cfg.max_newton {
            let sol = finish(x, &idx, &u, cfg, iters)?;
            return Err(Error::NewtonStalled(Box::new(sol)));
        }

        let (dir, dec2, slope) = newton_direction(&ev, &u, mu);
        if dec2 < mu || !(slope > 0.0) {
            if ev.gap(n) <= POLISH_GAP {
                if let Some(p) = polish(x, &idx, &u, mu.sqrt(), target) {
                    let sol = finish(x, &idx, &p, cfg, iters)?;
                    if sol.gap <= cfg.gap_tol {
                        return Ok(sol);
                    }
                }
            }
            mu *= cfg.barrier_shrink;
            continue;
        }

        let mut step = 1.0f64;
        for (ui, di) in u.iter().zip(&dir) {
            if *di < 0.0 {
                step = step.min(-FRACTION_TO_BOUNDARY * ui / di);
            }
        }
        let f0 = barrier_value(&ev, &u, mu);
        let mut accepted = None;
        while step > 1e-14 {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            if trial.iter().all(|&v| v > 0.0) {
                if let Some(tev) = Eval::at(x, &idx, &trial) {
                    if barrier_value(&tev, &trial, mu) >= f0 + ARMIJO_SLOPE * step * slope {
                        accepted = Some((trial, tev));
                        break;
                    }
                }
            }
            step *= BACKTRACK;
        }
        iters += 1;
        match accepted {
            Some((trial, tev)) => {
                // the direction sums to zero; this only removes rounding drift
                let s: f64 = trial.iter().sum();
                u = trial.into_iter().map(|v| v / s).collect();
                ev = tev;
            }
            // no progress possible at this mu: treat as centred
            None => mu *= cfg.barrier_shrink,
        }
    }
}

/// Plain Newton on the points with weight above `threshold`, the rest set to
/// zero. Succeeds when the weights stay positive and the certificate over the
/// whole subset reaches `target`.
fn polish(x: &DesignMatrix, idx: &[usize], u: &[f64], threshold: f64, target: f64) -> Option<Vec<f64>> {
    let n = x.n();
    let keep: Vec<usize> = (0..idx.len()).filter(|&a| u[a] > threshold).collect();
    if keep.len() < n {
        return None;
    }
    let sub: Vec<usize> = keep.iter().map(|&a| idx[a]).collect();
    let mut w: Vec<f64> = keep.iter().map(|&a| u[a]).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    let k = w.len();
    let ones = DVector::from_element(k, 1.0);
    for _ in 0..POLISH_STEPS {
        let ev = Eval::at(x, &sub, &w)?;
        // with sum(w) = 1 the step is w - nu P^{-1} 1, P = K o K
        let p = ev.k.map(|v| v * v);
        let l = linalg::cholesky(&p)?;
        let q = linalg::chol_solve(&l, &ones);
        let nu = 1.0 / q.sum();
        let dir: Vec<f64> = (0..k).map(|a| w[a] - nu * q[a]).collect();
        let next: Vec<f64> = w.iter().zip(&dir).map(|(a, d)| a + d).collect();
        if next.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let s: f64 = next.iter().sum();
        w = next.into_iter().map(|v| v / s).collect();
        if dir.iter().fold(0.0f64, |m, d| m.max(d.abs())) <= 1e-15 {
            break;
        }
    }
    let mut full = vec![0.0; idx.len()];
    for (&a, &v) in keep.iter().zip(&w) {
        full[a] = v;
    }
    let ev = Eval::at(x, idx, &full)?;
    (ev.gap(n) <= target).then_some(full)
}

/// Newton direction for the barrier problem, with the squared Newton
/// decrement and the directional derivative of the barrier objective.
fn newton_direction(ev: &Eval, u: &[f64], mu: f64) -> (Vec<f64>, f64, f64) {
    let k = u.len();
    let mut p = DMatrix::zeros(k, k);
    for b in 0..k {
        for a in 0..k {
            let kab = ev.k[(a, b)];
            p[(a, b)] = u[a] * kab * kab * u[b];
        }
        p[(b, b)] += mu;
    }
    let g = DVector::from_iterator(k, (0..k).map(|a| u[a] * ev.kappa(a) + mu));
    let uv = DVector::from_column_slice(u);
    let l = match linalg::cholesky_jittered(&p) {
        Some((l, _)) => l,
        None => return (vec![0.0; k], 0.0, 0.0),
    };
    let pa = linalg::chol_solve(&l, &g);
    let pb = linalg::chol_solve(&l, &uv);
    let nu = uv.dot(&pa) / uv.dot(&pb);
    let scaled = &pa - &pb * nu;
    let rhs = &g - &uv * nu;
    let dec2 = scaled.dot(&rhs);
    let slope = scaled.dot(&g);
    let dir = (0..k).map(|a| u[a] * scaled[a]).collect();
    (dir, dec2, slope)
}

fn finish(x: &DesignMatrix, idx: &[usize], u: &[f64], cfg: &RmpConfig, iters: usize) -> Result<RmpSolution> {
    let pairs = idx.iter().cloned().zip(u.iter().cloned()).filter(|&(_, w)| w > cfg.min_weight);
    let weights = DesignWeights::normalized(x.m(), pairs)?;
    let ellipsoid = ellipsoid::ellipsoid_from_weights(x, &weights)?;
    let objective = -ellipsoid.log_det();
    let cert = ellipsoid::certificate_for(x, &ellipsoid, Some(idx));
    Ok(RmpSolution { weights, ellipsoid, objective, gap: cert.gap, newton_iters: iters })
}

/// Indices carrying weight above `cfg.min_weight`, ascending.
pub fn extract_support(sol: &RmpSolution, cfg: &RmpConfig) -> Vec<usize> {
    support_above(&sol.weights, cfg.min_weight)
}

pub fn support_above(weights: &DesignWeights, min_weight: f64) -> Vec<usize> {
    weights.iter().filter(|&(_, w)| w > min_weight).map(|(i, _)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pts(p: &[[f64; 2]]) -> DesignMatrix {
        DesignMatrix::from_points(&p.iter().map(|q| q.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn orthonormal_subset_is_uniform() {
        for n in 2..6 {
            let mut data = vec![0.0; n * n];
            for i in 0..n {
                data[i * n + i] = 1.0;
            }
            let x = DesignMatrix::new(n, data, None).unwrap();
            let idx: Vec<usize> = (0..n).collect();
            let sol = solve_restricted(&x, &idx, None, &RmpConfig::default()).unwrap();
            for &v in sol.weights.values() {
                assert_relative_eq!(v, 1.0 / n as f64, epsilon = 1e-9);
            }
            let nf = n as f64;
            assert_relative_eq!(sol.objective, -nf * nf.ln(), epsilon = 1e-9);
            assert_relative_eq!(sol.ellipsoid.matrix(), &(DMatrix::identity(n, n) * nf), epsilon = 1e-7);
            assert_eq!(extract_support(&sol, &RmpConfig::default()), idx);
        }
    }

    #[test]
    fn triangle_optimum() {
        let x = pts(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let cfg = RmpConfig::default();
        let sol = solve_restricted(&x, &[0, 1, 2], None, &cfg).unwrap();
        for &v in sol.weights.values() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-8);
        }
        assert_relative_eq!(sol.objective, (1.0f64 / 3.0).ln(), epsilon = 1e-9);
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        assert_relative_eq!(sol.ellipsoid.matrix(), &expect, epsilon = 1e-7);
        assert!(sol.gap <= cfg.gap_tol);
        for i in 0..3 {
            assert_relative_eq!(sol.ellipsoid.mahalanobis(x.point(i)), 2.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn interior_point_gets_zero_weight() {
        let x = pts(&[[1.0, 0.0], [0.0, 1.0], [0.1, 0.1]]);
        let cfg = RmpConfig::default();
        let sol = solve_restricted(&x, &[0, 1, 2], None, &cfg).unwrap();
        assert_eq!(sol.weights.support(), &[0, 1]);
        assert_relative_eq!(sol.weights.get(0), 0.5, epsilon = 1e-10);
        assert_eq!(extract_support(&sol, &cfg), vec![0, 1]);
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let x = pts(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.2, -0.3]]);
        let cfg = RmpConfig::default();
        let cold = solve_restricted(&x, &[0, 1, 2, 3], None, &cfg).unwrap();
        let warm = DesignWeights::uniform(4, &[0, 1]).unwrap();
        let hot = solve_restricted(&x, &[0, 1, 2, 3], Some(&warm), &cfg).unwrap();
        assert_relative_eq!(cold.objective, hot.objective, epsilon = 1e-9);
    }

    #[test]
    fn threshold_rule() {
        let w = DesignWeights::new(3, vec![0, 1, 2], vec![0.5 - 1.5e-10, 0.5 - 1.5e-10, 3e-10]).unwrap();
        assert_eq!(support_above(&w, 1e-9), vec![0, 1]);
        let w = DesignWeights::uniform(3, &[0, 1, 2]).unwrap();
        assert_eq!(support_above(&w, 1e-9), vec![0, 1, 2]);
    }

    #[test]
    fn rank_deficient_subset() {
        let x = pts(&[[1.0, 1.0], [2.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(
            solve_restricted(&x, &[0, 1], None, &RmpConfig::default()),
            Err(Error::SubsetRankDeficient)
        ));
    }

    #[test]
    fn bad_config() {
        let x = pts(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let cfg = RmpConfig { barrier_shrink: 1.0, ..Default::default() };
        assert!(solve_restricted(&x, &[0, 1, 2], None, &cfg).is_err());
    }
}
