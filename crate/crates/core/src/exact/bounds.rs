use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, DesignWeights};
use crate::ellipsoid;
use crate::error::{Error, Result};
use crate::exact_design::ExactDesign;

/// `|phi_Rel|` below this makes the relative gap meaningless.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-8;

/// `h(N, n) = n ln(N / (N - n + 1))`.
pub fn approx_bound(total: usize, n: usize) -> Result<f64> {
    if n < 1 || total < n {
        return Err(Error::Domain(format!("need N >= n >= 1, got N = {total}, n = {n}")));
    }
    let nf = n as f64;
    let t = total as f64;
    Ok(nf * (t / (t - nf + 1.0)).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Limit-problem optimum `ln det(X U* X^T)`.
    pub phi_rel: f64,
    pub h_nn: f64,
    /// `phi_rel - h_nn`.
    pub lower_bound: f64,
    /// `ln det(G / N)`.
    pub achieved: f64,
    /// `(phi_rel - achieved) / |phi_rel|`, or the plain difference when the
    /// denominator is degenerate.
    pub gap: f64,
    pub corollary_satisfied: bool,
    pub degenerate_denominator: bool,
}

pub fn bound_report(x: &DesignMatrix, u: &DesignWeights, design: &ExactDesign) -> Result<BoundReport> {
    let n = x.n();
    let total = design.total();
    let phi_rel = ellipsoid::log_det_objective(x, u)?;
    let h_nn = approx_bound(total, n)?;
    let lower_bound = phi_rel - h_nn;
    let achieved = design.log_det() - n as f64 * (total as f64).ln();
    let degenerate = phi_rel.abs() < DEGENERATE_DENOMINATOR;
    let gap = if degenerate { phi_rel - achieved } else { (phi_rel - achieved) / phi_rel.abs() };
    Ok(BoundReport {
        phi_rel,
        h_nn,
        lower_bound,
        achieved,
        gap,
        corollary_satisfied: achieved >= lower_bound - 1e-8,
        degenerate_denominator: degenerate,
    })
}

/// Largest `tau_j - tau_i tau_j + tau_ij^2 - tau_i` over `i` in the design and
/// `j` in `s`; nonpositive at any exchange local optimum.
pub fn verify_lemma_tau(x: &DesignMatrix, s: &[usize], design: &ExactDesign) -> f64 {
    let tau_s: Vec<f64> = s.iter().map(|&j| design.tau(x, j)).collect();
    let mut worst = f64::NEG_INFINITY;
    for i in design.indices() {
        let ti = design.tau(x, i);
        for (&j, &tj) in s.iter().zip(&tau_s) {
            let tij = design.tau_pair(x, i, j);
            worst = worst.max(tj - ti * tj + tij * tij - ti);
        }
    }
    worst
}
