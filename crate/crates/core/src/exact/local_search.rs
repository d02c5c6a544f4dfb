use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::exact_design::{swap_ratio_from_taus, ExactDesign};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchVariant {
    /// Take the first improving swap in `(i, j)` order.
    First,
    /// Take the swap with the largest determinant ratio.
    #[default]
    Best,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchConfig {
    pub variant: SearchVariant,
    pub max_swaps: usize,
    /// A swap is accepted only if its determinant ratio is at least this.
    pub improve_tol: f64,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        LocalSearchConfig { variant: SearchVariant::Best, max_swaps: 100_000, improve_tol: 1.0 + 1e-10 }
    }
}

impl LocalSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.improve_tol > 1.0) {
            return Err(Error::InvalidInput("improve_tol must exceed 1".into()));
        }
        Ok(())
    }
}

/// Candidate grids at least this large are scanned in parallel.
const PAR_THRESHOLD: usize = 4096;

/// One scan over all exchanges `(i in I, j in S)`; returns the swap to take.
fn scan(x: &DesignMatrix, s: &[usize], d: &ExactDesign, cfg: &LocalSearchConfig) -> Option<(usize, usize, f64)> {
    let n = x.n();
    let ginv = d.inverse();
    let tau_s: Vec<f64> = s.iter().map(|&j| d.tau(x, j)).collect();
    let rows = d.indices();

    let row_best = |i: usize| -> Option<(usize, usize, f64)> {
        let xi = x.point(i);
        let mut w = vec![0.0; n];
        linalg::mat_vec(ginv, xi, &mut w);
        let ti = linalg::dot(xi, &w);
        let mut best: Option<(usize, usize, f64)> = None;
        for (&j, &tj) in s.iter().zip(&tau_s) {
            if j == i {
                continue;
            }
            let tij = linalg::dot(x.point(j), &w);
            let r = swap_ratio_from_taus(ti, tj, tij);
            if r >= cfg.improve_tol {
                match cfg.variant {
                    SearchVariant::First => return Some((i, j, r)),
                    SearchVariant::Best => {
                        if best.is_none_or(|b| r > b.2) {
                            best = Some((i, j, r));
                        }
                    }
                }
            }
        }
        best
    };

    match cfg.variant {
        SearchVariant::First => rows.iter().find_map(|&i| row_best(i)),
        SearchVariant::Best => {
            let per_row: Vec<Option<(usize, usize, f64)>> = if rows.len() * s.len() >= PAR_THRESHOLD {
                rows.par_iter().map(|&i| row_best(i)).collect()
            } else {
                rows.iter().map(|&i| row_best(i)).collect()
            };
            let mut best: Option<(usize, usize, f64)> = None;
            for cand in per_row.into_iter().flatten() {
                if best.is_none_or(|b| cand.2 > b.2) {
                    best = Some(cand);
                }
            }
            best
        }
    }
}

/// Exchange local search over the candidate set `s`. Terminates at a
/// 2-exchange local optimum: no swap reaches `cfg.improve_tol`.
pub fn local_search(
    x: &DesignMatrix,
    s: &[usize],
    init: ExactDesign,
    cfg: &LocalSearchConfig,
) -> Result<(ExactDesign, usize)> {
    cfg.validate()?;
    let mut s = s.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&j) = s.iter().find(|&&j| j >= x.m()) {
        return Err(Error::InvalidInput(format!("candidate index {j} out of range")));
    }
    if let Some(i) = init.indices().into_iter().find(|i| s.binary_search(i).is_err()) {
        return Err(Error::InvalidInput(format!("design index {i} is not a candidate")));
    }

    let mut d = init;
    let mut swaps = 0usize;
    let mut fresh = true;
    loop {
        match scan(x, &s, &d, cfg) {
            Some((i, j, _)) => {
                if swaps >= cfg.max_swaps {
                    return Err(Error::SwapLimit(Box::new(d), swaps));
                }
                d.swap_update(x, i, j)?;
                swaps += 1;
                fresh = false;
            }
            None if fresh => return Ok((d, swaps)),
            None => {
                // confirm optimality against a fresh factorization
                d.refactor(x)?;
                fresh = true;
            }
        }
    }
}
