//! Problem data and design weights.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, PIVOT_FLOOR};

/// `m` points in `R^n`, stored point-contiguous (column-major `n x m`).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    m: usize,
    data: Vec<f64>,
    id: Option<String>,
}

impl DesignMatrix {
    /// Builds the matrix from point-contiguous data of length `n * m`.
    ///
    /// Rejects non-finite entries, `n < 2`, `m < n` and point sets that do
    /// not span `R^n`.
    pub fn new(n: usize, data: Vec<f64>, id: Option<String>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("dimension n = {n} must be at least 2")));
        }
        if !data.len().is_multiple_of(n) {
            return Err(Error::DimensionMismatch {
                expected: n * (data.len() / n + 1),
                found: data.len(),
            });
        }
        let m = data.len() / n;
        if m < n {
            return Err(Error::InvalidInput(format!("need at least n = {n} points, got {m}")));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry in point {} coordinate {}",
                pos / n,
                pos % n
            )));
        }
        let x = DesignMatrix { n, m, data, id };
        let rank = x.numerical_rank();
        if rank < n {
            return Err(Error::RankDeficientData { n, rank });
        }
        Ok(x)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(Error::Parse {
                    location: format!("point {i}"),
                    message: format!("expected {n} coordinates, found {}", p.len()),
                });
            }
            data.extend_from_slice(p);
        }
        Self::new(n, data, None)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Applies `f` to every entry. The result is re-validated.
    pub fn map_entries(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::new(self.n, data, self.id.clone())
    }

    /// `sum_i x_i x_i^T`.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n, self.n);
        for p in self.points() {
            linalg::add_outer(&mut g, p, 1.0);
        }
        g
    }

    fn numerical_rank(&self) -> usize {
        let mut g = self.gram();
        // equilibrate so badly scaled coordinates do not masquerade as rank loss
        let d: Vec<f64> = (0..self.n).map(|i| g[(i, i)].sqrt()).collect();
        for j in 0..self.n {
            for i in 0..self.n {
                if d[i] > 0.0 && d[j] > 0.0 {
                    g[(i, j)] /= d[i] * d[j];
                }
            }
        }
        let eig = SymmetricEigen::new(g);
        let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        eig.eigenvalues.iter().filter(|&&l| l > PIVOT_FLOOR * top).count()
    }
}

/// Sparse point on the unit simplex in `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignWeights {
    m: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

const SUM_TOL: f64 = 1e-12;

impl DesignWeights {
    /// Validating constructor: sorted distinct in-range indices, strictly
    /// positive values summing to one within `1e-12`.
    pub fn new(m: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), found: values.len() });
        }
        if support.is_empty() {
            return Err(Error::InvalidInput("empty support".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("support indices must be sorted and distinct".into()));
        }
        if support.last().is_some_and(|&i| i >= m) {
            return Err(Error::InvalidInput("support index out of range".into()));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and strictly positive".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidInput(format!("weights sum to {sum}, not 1")));
        }
        Ok(DesignWeights { m, support, values })
    }

    /// Merges duplicate indices, drops non-positive entries and rescales to sum one.
    pub fn normalized(m: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().filter(|p| p.1 > 0.0).collect();
        pairs.sort_by_key(|p| p.0);
        let mut support: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if support.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                support.push(i);
                values.push(v);
            }
        }
        let sum: f64 = values.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidInput("weights have no positive mass".into()));
        }
        values.iter_mut().for_each(|v| *v /= sum);
        Self::new(m, support, values)
    }

    pub fn uniform(m: usize, indices: &[usize]) -> Result<Self> {
        Self::normalized(m, indices.iter().map(|&i| (i, 1.0)))
    }

    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::normalized(values.len(), values.iter().cloned().enumerate())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().cloned().zip(self.values.iter().cloned())
    }

    pub fn get(&self, i: usize) -> f64 {
        self.support.binary_search(&i).map_or(0.0, |k| self.values[k])
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.m];
        for (i, v) in self.iter() {
            d[i] = v;
        }
        d
    }
}
