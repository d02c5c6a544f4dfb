//! Integer designs and the rank-two exchange update.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg;

/// Swaps between full refactorizations of `G`.
pub const REFACTOR_EVERY: usize = 50;

/// Downdates with `1 - tau_i` below this are followed by a refactorization.
pub const LEVERAGE_GUARD: f64 = 1e-2;

/// Predicted determinant ratios at or below this make a swap singular.
pub const MIN_SWAP_RATIO: f64 = 1e-14;

/// Multiset of point indices with the unnormalized information matrix
/// `G = sum_i n_i x_i x_i^T`, its inverse and `ln det G`.
#[derive(Debug, Clone)]
pub struct ExactDesign {
    counts: BTreeMap<usize, u32>,
    total: usize,
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    log_det: f64,
    since_refactor: usize,
}

impl ExactDesign {
    pub fn from_counts(x: &DesignMatrix, counts: impl IntoIterator<Item = (usize, u32)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, c) in counts {
            if i >= x.m() {
                return Err(Error::InvalidInput(format!("index {i} out of range")));
            }
            if c > 0 {
                *map.entry(i).or_insert(0) += c;
            }
        }
        let total = map.values().map(|&c| c as usize).sum();
        if total == 0 {
            return Err(Error::InvalidInput("empty design".into()));
        }
        let n = x.n();
        let mut d = ExactDesign {
            counts: map,
            total,
            g: DMatrix::zeros(n, n),
            ginv: DMatrix::zeros(n, n),
            log_det: f64::NEG_INFINITY,
            since_refactor: 0,
        };
        d.refactor(x)?;
        Ok(d)
    }

    /// Recomputes `G` from the counts, then `G^{-1}` and `ln det G` from scratch.
    pub fn refactor(&mut self, x: &DesignMatrix) -> Result<()> {
        let g = information_of(x, self.counts.iter().map(|(&i, &c)| (i, c)));
        let l = linalg::cholesky(&g).ok_or(Error::SingularInformation)?;
        self.ginv = linalg::chol_inverse(&l);
        self.log_det = linalg::log_det(&l);
        self.g = g;
        self.since_refactor = 0;
        Ok(())
    }

    pub fn counts(&self) -> &BTreeMap<usize, u32> {
        &self.counts
    }

    pub fn count(&self, i: usize) -> u32 {
        self.counts.get(&i).copied().unwrap_or(0)
    }

    /// Distinct indices in the design, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.counts.keys().copied().collect()
    }

    /// Total number of experiments `N`.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn information(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.ginv
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `tau_i = x_i^T G^{-1} x_i`.
    pub fn tau(&self, x: &DesignMatrix, i: usize) -> f64 {
        let p = x.point(i);
        linalg::bilinear(&self.ginv, p, p)
    }

    /// `tau_ij = x_i^T G^{-1} x_j`.
    pub fn tau_pair(&self, x: &DesignMatrix, i: usize, j: usize) -> f64 {
        linalg::bilinear(&self.ginv, x.point(i), x.point(j))
    }

    /// `det(G - x_i x_i^T + x_j x_j^T) / det G = (1 + tau_j)(1 - tau_i) + tau_ij^2`.
    pub fn swap_ratio(&self, x: &DesignMatrix, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        swap_ratio_from_taus(self.tau(x, i), self.tau(x, j), self.tau_pair(x, i, j))
    }

    /// Replaces one copy of `i` by one copy of `j` and returns the
    /// determinant ratio. `G^{-1}` is updated by two Sherman-Morrison steps and
    /// refactorized every [`REFACTOR_EVERY`] swaps.
    pub fn swap_update(&mut self, x: &DesignMatrix, i: usize, j: usize) -> Result<f64> {
        if self.count(i) == 0 {
            return Err(Error::InvalidInput(format!("index {i} is not in the design")));
        }
        if j >= x.m() {
            return Err(Error::InvalidInput(format!("index {j} out of range")));
        }
        if i == j {
            return Ok(1.0);
        }
        let ratio = self.swap_ratio(x, i, j);
        if !(ratio > MIN_SWAP_RATIO) {
            return Err(Error::SingularAfterSwap { ratio });
        }

        let n = x.n();
        let (xi, xj) = (x.point(i), x.point(j));
        let mut w = vec![0.0; n];

        // add x_j
        linalg::mat_vec(&self.ginv, xj, &mut w);
        let tj = linalg::dot(xj, &w);
        linalg::add_outer(&mut self.ginv, &w, -1.0 / (1.0 + tj));
        // remove x_i
        linalg::mat_vec(&self.ginv, xi, &mut w);
        let ti = linalg::dot(xi, &w);
        linalg::add_outer(&mut self.ginv, &w, 1.0 / (1.0 - ti));
        linalg::symmetrize(&mut self.ginv);

        linalg::add_outer(&mut self.g, xj, 1.0);
        linalg::add_outer(&mut self.g, xi, -1.0);
        self.log_det += ratio.ln();

        let ci = self.counts.get_mut(&i).expect("checked above");
        *ci -= 1;
        if *ci == 0 {
            self.counts.remove(&i);
        }
        *self.counts.entry(j).or_insert(0) += 1;

        self.since_refactor += 1;
        // removing a high-leverage point loses digits in the downdate
        if self.since_refactor >= REFACTOR_EVERY || 1.0 - ti < LEVERAGE_GUARD {
            self.refactor(x)?;
        }
        Ok(ratio)
    }
}

#[inline]
pub fn swap_ratio_from_taus(tau_i: f64, tau_j: f64, tau_ij: f64) -> f64 {
    (1.0 + tau_j) * (1.0 - tau_i) + tau_ij * tau_ij
}

/// `sum_i c_i x_i x_i^T` for integer multiplicities.
pub fn information_of(x: &DesignMatrix, counts: impl IntoIterator<Item = (usize, u32)>) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(x.n(), x.n());
    for (i, c) in counts {
        linalg::add_outer(&mut g, x.point(i), c as f64);
    }
    linalg::symmetrize(&mut g);
    g
}
