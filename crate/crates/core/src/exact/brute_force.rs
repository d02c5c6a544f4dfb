use std::collections::BTreeMap;

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::exact_design::information_of;
use crate::linalg;

/// Largest number of multisets the exhaustive search will visit.
pub const MAX_ENUMERATION: u128 = 1_000_000;

/// `C(k + N - 1, N)`, saturating.
pub fn multiset_count(k: usize, total: usize) -> u128 {
    if k == 0 {
        return if total == 0 { 1 } else { 0 };
    }
    let mut c: u128 = 1;
    for i in 1..=total as u128 {
        c = c.saturating_mul(k as u128 - 1 + i) / i;
    }
    c
}

/// Exhaustive maximum of `ln det sum n_i x_i x_i^T` over multisets of size
/// `total` drawn from `candidates`. Singular multisets score `-inf`; among
/// equal values the lexicographically first multiset wins.
pub fn brute_force_exact(x: &DesignMatrix, candidates: &[usize], total: usize) -> Result<(f64, BTreeMap<usize, u32>)> {
    let mut cand = candidates.to_vec();
    cand.sort_unstable();
    cand.dedup();
    if let Some(&j) = cand.iter().find(|&&j| j >= x.m()) {
        return Err(Error::InvalidInput(format!("candidate index {j} out of range")));
    }
    if cand.is_empty() || total == 0 {
        return Err(Error::InvalidInput("need candidates and N > 0".into()));
    }
    let count = multiset_count(cand.len(), total);
    if count > MAX_ENUMERATION {
        return Err(Error::TooLarge { count });
    }
    let mut search = Search {
        x,
        cand: &cand,
        chosen: vec![0; cand.len()],
        best: f64::NEG_INFINITY,
        best_counts: None,
    };
    search.visit(0, total);
    let counts = search
        .best_counts
        .unwrap_or_else(|| search.chosen.clone())
        .iter()
        .zip(&cand)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &i)| (i, c))
        .collect();
    Ok((search.best, counts))
}

struct Search<'a> {
    x: &'a DesignMatrix,
    cand: &'a [usize],
    chosen: Vec<u32>,
    best: f64,
    best_counts: Option<Vec<u32>>,
}

impl Search<'_> {
    /// Distributes `left` units over candidates `pos..`, larger counts first,
    /// so multisets are visited in lexicographic order.
    fn visit(&mut self, pos: usize, left: usize) {
        if pos + 1 == self.cand.len() {
            self.chosen[pos] = left as u32;
            let g = information_of(self.x, self.cand.iter().copied().zip(self.chosen.iter().copied()));
            let value = linalg::cholesky(&g).map(|l| linalg::log_det(&l)).unwrap_or(f64::NEG_INFINITY);
            let better = match self.best_counts {
                None => true,
                Some(_) if self.best == f64::NEG_INFINITY => value > self.best,
                Some(_) => value - self.best > 1e-12 * self.best.abs().max(1.0),
            };
            if better {
                self.best = value;
                self.best_counts = Some(self.chosen.clone());
            }
            self.chosen[pos] = 0;
            return;
        }
        for c in (0..=left).rev() {
            self.chosen[pos] = c as u32;
            self.visit(pos + 1, left - c);
        }
        self.chosen[pos] = 0;
    }
}
