//! Column generation for the limit problem with Harman-Pronzato elimination.
//!
//! Each outer iteration solves the restricted master problem on the working
//! set, keeps its support, adds the `n0` most violated points of the active
//! set, and drops from the active set every point that the
//! Harman-Pronzato bound certifies can never carry weight at the optimum.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, DesignWeights};
use crate::ellipsoid::{self, EllipsoidMatrix};
use crate::error::{Error, Result};
use crate::frank_wolfe::ky_init;
use crate::report::{Method, ProgressRecord, SolveReport};
use crate::rmp::{self, RmpConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColGenConfig {
    /// Most-violated points added per round; `None` means `5 n`.
    pub n0: Option<usize>,
    /// Absolute tolerance on `z = max(0, max_i kappa_i - n)`.
    pub stop_tol: f64,
    pub rmp: RmpConfig,
    /// Never drop zero-weight points from the working set.
    pub keep_all: bool,
    pub hp_elimination: bool,
    pub max_outer: usize,
    /// Seed for the initial direction of the Kumar-Yildirim start.
    pub seed: u64,
    /// Print one JSON progress record per iteration to stderr.
    pub verbose: bool,
}

impl Default for ColGenConfig {
    fn default() -> Self {
        ColGenConfig {
            n0: None,
            stop_tol: 1e-5,
            rmp: RmpConfig::default(),
            keep_all: false,
            hp_elimination: true,
            max_outer: 500,
            seed: 0,
            verbose: false,
        }
    }
}

impl ColGenConfig {
    /// Pure column generation: one point per round, nothing dropped or eliminated.
    pub fn keep_all_single() -> Self {
        ColGenConfig { n0: Some(1), keep_all: true, hp_elimination: false, ..Default::default() }
    }

    pub fn batch_size(&self, n: usize) -> usize {
        self.n0.unwrap_or(5 * n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == Some(0) {
            return Err(Error::InvalidInput("n0 must be at least 1".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidInput("stop_tol must be positive".into()));
        }
        self.rmp.validate()
    }
}

/// Result of a limit-problem solve.
#[derive(Debug, Clone)]
pub struct LimitSolution {
    /// Full-length weights.
    pub weights: DesignWeights,
    pub ellipsoid: EllipsoidMatrix,
    pub report: SolveReport,
    pub history: Vec<ProgressRecord>,
    /// Indices removed by elimination and never restored, ascending.
    pub eliminated: Vec<usize>,
    /// Largest relative difference between an updated and a freshly
    /// factorized ellipsoid matrix (Frank-Wolfe only).
    pub max_refactor_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pricing {
    /// `max(0, max_i kappa_i - n)` over the scanned indices.
    pub z: f64,
    /// Up to `n0` indices with `kappa_i > n`, most violated first, ties by index.
    pub violated: Vec<usize>,
}

/// Pricing scan of `active` against the ellipsoid `h`.
pub fn pricing(x: &DesignMatrix, h: &EllipsoidMatrix, active: &[usize], n0: usize) -> Pricing {
    let kappas = h.kappas(x, active);
    pricing_from_kappas(active, &kappas, x.n(), n0)
}

pub(crate) fn pricing_from_kappas(active: &[usize], kappas: &[f64], n: usize, n0: usize) -> Pricing {
    let nf = n as f64;
    // violations at rounding level count as zero
    let floor = 64.0 * f64::EPSILON * nf;
    let mut z = 0.0f64;
    let mut viol: Vec<(f64, usize)> = Vec::new();
    for (&i, &k) in active.iter().zip(kappas) {
        let v = k - nf;
        if v > floor {
            z = z.max(v);
            viol.push((v, i));
        }
    }
    let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if viol.len() > n0 && n0 > 0 {
        viol.select_nth_unstable_by(n0 - 1, order);
        viol.truncate(n0);
    }
    viol.sort_unstable_by(order);
    viol.truncate(n0);
    Pricing { z, violated: viol.into_iter().map(|p| p.1).collect() }
}

/// Harman-Pronzato threshold `h_n(eps) = n (1 + eps/2 - sqrt(eps (4 + eps - 4/n)) / 2)`.
pub fn hp_constant(epsilon: f64, n: usize) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} must be nonnegative")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("dimension n = {n} must be at least 2")));
    }
    let nf = n as f64;
    let root = (epsilon * (4.0 + epsilon - 4.0 / nf)).sqrt();
    Ok(nf * (1.0 + 0.5 * epsilon - 0.5 * root))
}

/// Indices of `active` with `kappa_i >= h_n(epsilon)`; the rest cannot be
/// support points of any optimal design.
pub fn hp_filter(x: &DesignMatrix, h: &EllipsoidMatrix, epsilon: f64, active: &[usize]) -> Result<Vec<usize>> {
    let threshold = hp_constant(epsilon, x.n())?;
    let kappas = h.kappas(x, active);
    Ok(hp_retain(active, &kappas, threshold))
}

pub(crate) fn hp_retain(active: &[usize], kappas: &[f64], threshold: f64) -> Vec<usize> {
    active.iter().zip(kappas).filter(|&(_, &k)| k >= threshold).map(|(&i, _)| i).collect()
}

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Runs column generation to `z <= cfg.stop_tol` over the full point set.
pub fn run_column_generation(x: &DesignMatrix, cfg: &ColGenConfig) -> Result<LimitSolution> {
    cfg.validate()?;
    let start = Instant::now();
    let n = x.n();
    let nf = n as f64;
    let n0 = cfg.batch_size(n);

    let init = ky_init(x, cfg.seed)?;
    let mut working: Vec<usize> = init.support().to_vec();
    let mut warm = init;
    let mut active: Vec<usize> = (0..x.m()).collect();
    let mut eliminated: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut iter = 0usize;

    loop {
        iter += 1;
        let sol = match rmp::solve_restricted(x, &working, Some(&warm), &cfg.rmp) {
            Ok(s) => s,
            Err(Error::NewtonStalled(best)) => *best,
            Err(e) => return Err(e),
        };
        let support = rmp::extract_support(&sol, &cfg.rmp);
        let kappas = sol.ellipsoid.kappas(x, &active);
        let priced = pricing_from_kappas(&active, &kappas, n, n0);

        let record = ProgressRecord {
            iteration: iter,
            active: active.len(),
            working: working.len(),
            violation: priced.z,
            objective: sol.objective,
            gap: sol.gap,
        };
        if cfg.verbose {
            record.emit();
        }
        history.push(record);

        let rmp_certified = sol.gap <= cfg.rmp.gap_tol;
        if priced.z <= cfg.stop_tol && rmp_certified {
            // eliminated points are interior in exact arithmetic; check it
            let ek = sol.ellipsoid.kappas(x, &eliminated);
            let back: Vec<usize> =
                eliminated.iter().zip(&ek).filter(|&(_, &k)| k - nf > cfg.stop_tol).map(|(&i, _)| i).collect();
            if back.is_empty() {
                let kmax = kappas.iter().chain(&ek).cloned().fold(f64::NEG_INFINITY, f64::max);
                let report = limit_report(&sol, iter, kmax, n, eliminated.len(), working.len(), start, true);
                return Ok(LimitSolution { weights: sol.weights, ellipsoid: sol.ellipsoid, report, history, eliminated, max_refactor_drift: 0.0 });
            }
            eliminated.retain(|i| back.binary_search(i).is_err());
            active = sorted_union(&active, &back);
            let restored = pricing(x, &sol.ellipsoid, &back, n0);
            working = sorted_union(&support, &restored.violated);
            warm = sol.weights;
            continue;
        }

        if iter >= cfg.max_outer {
            let ek = sol.ellipsoid.kappas(x, &eliminated);
            let kmax = kappas.iter().chain(&ek).cloned().fold(f64::NEG_INFINITY, f64::max);
            let report = limit_report(&sol, iter, kmax, n, eliminated.len(), working.len(), start, false);
            return Err(Error::IterationLimit(Box::new(LimitSolution {
                weights: sol.weights,
                ellipsoid: sol.ellipsoid,
                report,
                history,
                eliminated,
                max_refactor_drift: 0.0,
            })));
        }

        working = if cfg.keep_all {
            sorted_union(&working, &priced.violated)
        } else {
            sorted_union(&support, &priced.violated)
        };

        if cfg.hp_elimination && priced.z > 0.0 {
            let threshold = hp_constant(priced.z, n)?;
            let before = active.len();
            let mut kept = Vec::with_capacity(before);
            for (&i, &k) in active.iter().zip(&kappas) {
                if k >= threshold || working.binary_search(&i).is_ok() {
                    kept.push(i);
                } else {
                    eliminated.push(i);
                }
            }
            if kept.len() < before {
                eliminated.sort_unstable();
            }
            active = kept;
        }
        warm = sol.weights;
    }
}

#[allow(clippy::too_many_arguments)]
fn limit_report(
    sol: &rmp::RmpSolution,
    iterations: usize,
    kappa_max: f64,
    n: usize,
    eliminated: usize,
    working: usize,
    start: Instant,
    converged: bool,
) -> SolveReport {
    SolveReport {
        method: Method::ColumnGeneration,
        objective: sol.objective,
        duality_gap: ellipsoid::gap_from_kappa(kappa_max, n),
        violation: (kappa_max - n as f64).max(0.0),
        iterations,
        support_size: sol.weights.support().len(),
        eliminated,
        working_set: working,
        wall_time: start.elapsed().as_secs_f64(),
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn pts(p: &[[f64; 2]]) -> DesignMatrix {
        DesignMatrix::from_points(&p.iter().map(|q| q.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn pricing_examples() {
        let x = pts(&[[2.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let id = EllipsoidMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let p = pricing(&x, &id, &[0, 1, 2], 1);
        assert_eq!(p.z, 2.0);
        assert_eq!(p.violated, vec![0]);

        let tri = pts(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let h = EllipsoidMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0])).unwrap();
        let p = pricing(&tri, &h, &[0, 1, 2], 5);
        assert_eq!(p.z, 0.0);
        assert!(p.violated.is_empty());
    }

    #[test]
    fn pricing_tie_breaks_by_index() {
        // kappa = 2.5 for both of the first two points under H = I
        let s = 2.5f64.sqrt();
        let x = pts(&[[0.0, s], [s, 0.0], [0.1, 0.1]]);
        let id = EllipsoidMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let p = pricing_from_kappas(&[0, 1, 2], &id.kappas(&x, &[0, 1, 2]), 2, 1);
        assert_eq!(p.violated, vec![0]);
        let p = pricing_from_kappas(&[5, 3], &[2.5, 2.5], 2, 1);
        assert_eq!(p.violated, vec![3]);
        let p = pricing_from_kappas(&[5, 3, 9], &[2.5, 2.5, 3.0], 2, 10);
        assert_eq!(p.violated, vec![9, 3, 5]);
    }

    #[test]
    fn hp_constant_examples() {
        for n in 2..8 {
            assert_eq!(hp_constant(0.0, n).unwrap(), n as f64);
        }
        assert_relative_eq!(hp_constant(1.0, 2).unwrap(), 3.0 - 3f64.sqrt(), epsilon = 1e-14);
        assert!(hp_constant(0.5, 10).unwrap() < 10.0);
        assert!(matches!(hp_constant(-1e-3, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn hp_filter_examples() {
        // H = I so kappa = |x|^2
        let x = pts(&[[0.5f64.sqrt(), 0.0], [0.0, 1.5f64.sqrt()], [3f64.sqrt(), 0.0]]);
        let id = EllipsoidMatrix::new(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(hp_filter(&x, &id, 1.0, &[0, 1, 2]).unwrap(), vec![1, 2]);
        // eps = 0: only kappa >= n survive
        assert_eq!(hp_filter(&x, &id, 0.0, &[0, 1, 2]).unwrap(), vec![2]);
    }

    #[test]
    fn orthonormal_converges_in_one_iteration() {
        let x = DesignMatrix::new(3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], None).unwrap();
        let sol = run_column_generation(&x, &ColGenConfig::default()).unwrap();
        assert_eq!(sol.report.iterations, 1);
        assert!(sol.report.violation < 1e-9);
        for &v in sol.weights.values() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn short_point_is_dropped() {
        let x = pts(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.1, 0.1]]);
        let sol = run_column_generation(&x, &ColGenConfig::default()).unwrap();
        assert!(sol.weights.support().iter().all(|&i| i < 3));
        assert_relative_eq!(sol.report.objective, (1.0f64 / 3.0).ln(), epsilon = 1e-6);
        assert!(sol.report.converged);
    }
}
