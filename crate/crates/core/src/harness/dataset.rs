use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg;

pub const MIXTURE_COMPONENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    SyntheticMixture,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Dimensions; for files, zero means "take from the file".
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    /// sinh-arcsinh parameter; 1 leaves the data untouched.
    #[serde(default = "unit")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn unit() -> f64 {
    1.0
}

impl DatasetSpec {
    pub fn synthetic(n: usize, m: usize, seed: u64) -> Self {
        DatasetSpec { kind: DatasetKind::SyntheticMixture, n, m, seed, p: 1.0, path: None }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        DatasetSpec { kind: DatasetKind::File, n: 0, m: 0, seed: 0, p: 1.0, path: Some(path.into()) }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0) || !self.p.is_finite() {
            return Err(Error::Domain(format!("transform parameter p = {} must be positive", self.p)));
        }
        match self.kind {
            DatasetKind::SyntheticMixture => {
                if self.n < 2 || self.m < self.n + 1 {
                    return Err(Error::InvalidInput(format!(
                        "synthetic data needs n >= 2 and m >= n + 1, got n = {}, m = {}",
                        self.n, self.m
                    )));
                }
            }
            DatasetKind::File => {
                if self.path.is_none() {
                    return Err(Error::InvalidInput("file dataset without a path".into()));
                }
            }
        }
        Ok(())
    }

    /// Generates or loads the data and applies the transform.
    pub fn materialize(&self) -> Result<DesignMatrix> {
        self.validate()?;
        let x = match self.kind {
            DatasetKind::SyntheticMixture => generate_mixture(self.n, self.m, self.seed)?,
            DatasetKind::File => {
                let x = super::io::load_dataset(self.path.as_deref().expect("validated"), None)?;
                if self.n != 0 && self.n != x.n() {
                    return Err(Error::DimensionMismatch { expected: self.n, found: x.n() });
                }
                if self.m != 0 && self.m != x.m() {
                    return Err(Error::DimensionMismatch { expected: self.m, found: x.m() });
                }
                x
            }
        };
        sinh_arcsinh_transform(&x, self.p)
    }
}

/// `m` points from an equal-weight mixture of five Gaussians with means
/// uniform on `[-5, 5]^n` and covariances `A A^T + 0.1 I`, `A` standard normal.
pub fn generate_mixture(n: usize, m: usize, seed: u64) -> Result<DesignMatrix> {
    if n < 2 || m < n + 1 {
        return Err(Error::InvalidInput(format!("need n >= 2 and m >= n + 1, got n = {n}, m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(MIXTURE_COMPONENTS);
    let mut factors = Vec::with_capacity(MIXTURE_COMPONENTS);
    for _ in 0..MIXTURE_COMPONENTS {
        let mean: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..=5.0)).collect();
        let a: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
        let l = linalg::cholesky(&cov).ok_or_else(|| Error::Domain("mixture covariance not positive definite".into()))?;
        means.push(mean);
        factors.push(l);
    }
    let mut data = Vec::with_capacity(n * m);
    let mut z = vec![0.0; n];
    for _ in 0..m {
        let c = rng.random_range(0..MIXTURE_COMPONENTS);
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        let l = &factors[c];
        for r in 0..n {
            let mut s = means[c][r];
            for k in 0..=r {
                s += l[(r, k)] * z[k];
            }
            data.push(s);
        }
    }
    DesignMatrix::new(n, data, Some(format!("mixture-n{n}-m{m}-s{seed}")))
}

/// Entrywise `x -> sinh(arcsinh(x) / p)`.
pub fn sinh_arcsinh_transform(x: &DesignMatrix, p: f64) -> Result<DesignMatrix> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("transform parameter p = {p} must be positive")));
    }
    if p == 1.0 {
        return Ok(x.clone());
    }
    x.map_entries(|v| (v.asinh() / p).sinh())
}

/// Mean over coordinates of `ln(m4 / m2^2)` with population moments.
pub fn avg_log_kurtosis(x: &DesignMatrix) -> Result<f64> {
    let (n, m) = (x.n(), x.m());
    let mf = m as f64;
    let mut mean = vec![0.0; n];
    for p in x.points() {
        mean.iter_mut().zip(p).for_each(|(a, v)| *a += v);
    }
    mean.iter_mut().for_each(|a| *a /= mf);
    let mut m2 = vec![0.0; n];
    let mut m4 = vec![0.0; n];
    for p in x.points() {
        for k in 0..n {
            let d = p[k] - mean[k];
            let d2 = d * d;
            m2[k] += d2;
            m4[k] += d2 * d2;
        }
    }
    let mut total = 0.0;
    for k in 0..n {
        let var = m2[k] / mf;
        if !(var > 1e-12) {
            return Err(Error::DegenerateCoordinate { coord: k });
        }
        total += (m4[k] / mf / (var * var)).ln();
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mixture_is_deterministic() {
        let a = generate_mixture(4, 500, 9).unwrap();
        let b = generate_mixture(4, 500, 9).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), generate_mixture(4, 500, 10).unwrap().data());
    }

    #[test]
    fn mixture_full_rank() {
        let x = generate_mixture(10, 100_000, 1).unwrap();
        assert_eq!((x.n(), x.m()), (10, 100_000));
    }

    #[test]
    fn transform_examples() {
        let x = DesignMatrix::from_points(&[vec![2f64.sinh(), 0.0], vec![-1.0, 3.0], vec![0.5, -0.25]]).unwrap();
        let same = sinh_arcsinh_transform(&x, 1.0).unwrap();
        assert_eq!(same.data(), x.data());
        let y = sinh_arcsinh_transform(&x, 2.0).unwrap();
        assert_relative_eq!(y.point(0)[0], 1.175201, epsilon = 1e-6);
        assert_eq!(y.point(0)[1], 0.0);
        for (a, b) in x.data().iter().zip(y.data()) {
            assert_eq!(*a == 0.0, *b == 0.0);
            assert!(*a == 0.0 || a.signum() == b.signum());
            assert!(b.abs() <= a.abs() + 1e-15);
        }
        assert!(matches!(sinh_arcsinh_transform(&x, 0.0), Err(Error::Domain(_))));
        assert!(matches!(sinh_arcsinh_transform(&x, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn kurtosis_two_point_mass() {
        let x = DesignMatrix::from_points(&[vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0]]).unwrap();
        assert_relative_eq!(avg_log_kurtosis(&x).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kurtosis_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..3 * 200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = DesignMatrix::new(3, data, None).unwrap();
        assert!((avg_log_kurtosis(&x).unwrap() - 3f64.ln()).abs() < 0.1);
    }

    #[test]
    fn kurtosis_constant_coordinate() {
        let x = DesignMatrix::from_points(&[vec![1.0, 1.0], vec![2.0, 1.0], vec![3.0, 1.0]]).unwrap();
        assert!(matches!(avg_log_kurtosis(&x), Err(Error::DegenerateCoordinate { coord: 1 })));
    }

    #[test]
    fn spec_validation() {
        assert!(DatasetSpec::synthetic(2, 3, 0).validate().is_ok());
        assert!(DatasetSpec::synthetic(2, 2, 0).validate().is_err());
        assert!(DatasetSpec::synthetic(3, 10, 0).with_p(0.0).validate().is_err());
        let s: DatasetSpec = serde_json::from_str(r#"{"kind":"synthetic-mixture","n":3,"m":10,"seed":4}"#).unwrap();
        assert_eq!(s.p, 1.0);
    }
}
