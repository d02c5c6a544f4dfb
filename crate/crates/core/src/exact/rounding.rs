use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, DesignWeights};
use crate::error::{Error, Result};
use crate::exact_design::{information_of, swap_ratio_from_taus, ExactDesign};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundingVariant {
    /// `floor(N u_i)` plus one unit to the largest remainders, ties to the lower index.
    #[default]
    LargestRemainder,
    /// The `N` heaviest support points, once each; ties to the lower index.
    TopN,
}

/// Remainders closer than this are treated as equal.
const REMAINDER_TIE: f64 = 1e-9;

pub fn round_to_exact(x: &DesignMatrix, u: &DesignWeights, total: usize, variant: RoundingVariant) -> Result<ExactDesign> {
    let n = x.n();
    if total < n {
        return Err(Error::Domain(format!("N = {total} is smaller than n = {n}")));
    }
    if u.m() != x.m() {
        return Err(Error::DimensionMismatch { expected: x.m(), found: u.m() });
    }
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    match variant {
        RoundingVariant::LargestRemainder => {
            let mut assigned = 0usize;
            let mut rem: Vec<(usize, f64)> = Vec::with_capacity(u.support().len());
            for (i, w) in u.iter() {
                let target = total as f64 * w;
                let base = target.floor();
                if base > 0.0 {
                    counts.insert(i, base as u32);
                    assigned += base as usize;
                }
                rem.push((i, target - base));
            }
            rem.sort_by(|a, b| {
                if (a.1 - b.1).abs() <= REMAINDER_TIE {
                    a.0.cmp(&b.0)
                } else {
                    b.1.total_cmp(&a.1)
                }
            });
            // rounding error can leave assigned slightly off; cycle if needed
            let mut k = 0;
            while assigned < total {
                *counts.entry(rem[k % rem.len()].0).or_insert(0) += 1;
                assigned += 1;
                k += 1;
            }
        }
        RoundingVariant::TopN => {
            if u.support().len() < total {
                return Err(Error::Domain(format!(
                    "top-N rounding needs at least N = {total} support points, found {}",
                    u.support().len()
                )));
            }
            let mut order: Vec<(usize, f64)> = u.iter().collect();
            order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for &(i, _) in order.iter().take(total) {
                counts.insert(i, 1);
            }
        }
    }
    repair(x, u.support(), counts)
}

/// Moves single units of multiplicity onto unused support points, greedily by
/// regularized determinant ratio, until `G` is nonsingular.
fn repair(x: &DesignMatrix, support: &[usize], mut counts: BTreeMap<usize, u32>) -> Result<ExactDesign> {
    let n = x.n();
    for _ in 0..=support.len() {
        match ExactDesign::from_counts(x, counts.iter().map(|(&i, &c)| (i, c))) {
            Ok(d) => return Ok(d),
            Err(Error::SingularInformation) => {}
            Err(e) => return Err(e),
        }
        let unused: Vec<usize> = support.iter().copied().filter(|j| !counts.contains_key(j)).collect();
        if unused.is_empty() {
            break;
        }
        let mut g = information_of(x, counts.iter().map(|(&i, &c)| (i, c)));
        let delta = 1e-8 * (g.trace() / n as f64).max(1e-300);
        for d in 0..n {
            g[(d, d)] += delta;
        }
        let l = linalg::cholesky(&g).ok_or(Error::InfeasibleRounding)?;
        let ginv: DMatrix<f64> = linalg::chol_inverse(&l);
        let mut best: Option<(usize, usize, f64)> = None;
        for (&i, &c) in &counts {
            let xi = x.point(i);
            let ti = linalg::bilinear(&ginv, xi, xi);
            for &j in &unused {
                let xj = x.point(j);
                let mut r = swap_ratio_from_taus(ti, linalg::bilinear(&ginv, xj, xj), linalg::bilinear(&ginv, xi, xj));
                // prefer taking from points with spare copies on ties
                if c > 1 {
                    r *= 1.0 + 1e-12;
                }
                if best.is_none_or(|b| r > b.2) {
                    best = Some((i, j, r));
                }
            }
        }
        let (i, j, _) = best.ok_or(Error::InfeasibleRounding)?;
        let ci = counts.get_mut(&i).expect("present");
        *ci -= 1;
        if *ci == 0 {
            counts.remove(&i);
        }
        counts.insert(j, 1);
    }
    Err(Error::InfeasibleRounding)
}
