//! Information matrices, the dual ellipsoid `H = (X U X^T)^{-1}` and the
//! duality-gap certificate shared by every solver.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::design::{DesignMatrix, DesignWeights};
use crate::error::{Error, Result};
use crate::linalg;

/// Point scans shorter than this run sequentially.
const PAR_THRESHOLD: usize = 8192;

/// Symmetric positive-definite shape matrix `H` of a centred ellipsoid
/// `{x : x^T H x <= n}`, carried with its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidMatrix {
    h: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl EllipsoidMatrix {
    /// Wraps a symmetric positive-definite `H`.
    pub fn new(mut h: DMatrix<f64>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::InvalidInput("ellipsoid matrix must be square".into()));
        }
        let asym = linalg::rel_diff(&h, &h.transpose());
        if !(asym <= 1e-12) {
            return Err(Error::InvalidInput(format!("matrix not symmetric (rel. asymmetry {asym:e})")));
        }
        linalg::symmetrize(&mut h);
        let (chol, _) = linalg::cholesky_jittered(&h).ok_or(Error::SingularInformation)?;
        let log_det = linalg::log_det(&chol);
        Ok(EllipsoidMatrix { h, chol, log_det })
    }

    /// `H = M^{-1}` for a positive-definite information matrix `M`.
    pub fn from_information(info: &DMatrix<f64>) -> Result<Self> {
        let l = linalg::cholesky(info).ok_or(Error::SingularInformation)?;
        Self::new(linalg::chol_inverse(&l))
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `ln det H`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `x^T H x`, evaluated as `||L^T x||^2`.
    #[inline]
    pub fn mahalanobis(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n());
        linalg::quad_form_factor(&self.chol, x)
    }

    /// `kappa_i = x_i^T H x_i` for every index in `indices`, in order.
    pub fn kappas(&self, x: &DesignMatrix, indices: &[usize]) -> Vec<f64> {
        if indices.len() >= PAR_THRESHOLD {
            indices.par_iter().map(|&i| self.mahalanobis(x.point(i))).collect()
        } else {
            indices.iter().map(|&i| self.mahalanobis(x.point(i))).collect()
        }
    }

    /// Scaled copy `c * H`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0);
        let s = c.sqrt();
        EllipsoidMatrix {
            h: &self.h * c,
            chol: &self.chol * s,
            log_det: self.log_det + self.n() as f64 * c.ln(),
        }
    }
}

/// Free-function form of [`EllipsoidMatrix::mahalanobis`].
pub fn mahalanobis(h: &EllipsoidMatrix, x: &[f64]) -> f64 {
    h.mahalanobis(x)
}

/// `X U X^T = sum_{i in supp u} u_i x_i x_i^T`.
pub fn info_matrix(x: &DesignMatrix, u: &DesignWeights) -> DMatrix<f64> {
    assert_eq!(u.m(), x.m(), "weights and data disagree on m");
    let mut info = DMatrix::zeros(x.n(), x.n());
    for (i, w) in u.iter() {
        linalg::add_outer(&mut info, x.point(i), w);
    }
    linalg::symmetrize(&mut info);
    info
}

/// `g0(u) = ln det(X U X^T)`; `SingularInformation` when the support does
/// not span the space.
pub fn log_det_objective(x: &DesignMatrix, u: &DesignWeights) -> Result<f64> {
    if u.support().len() < x.n() {
        return Err(Error::SingularInformation);
    }
    let l = linalg::cholesky(&info_matrix(x, u)).ok_or(Error::SingularInformation)?;
    Ok(linalg::log_det(&l))
}

/// `H = (X U X^T)^{-1}`.
pub fn ellipsoid_from_weights(x: &DesignMatrix, u: &DesignWeights) -> Result<EllipsoidMatrix> {
    if u.support().len() < x.n() {
        return Err(Error::SingularInformation);
    }
    EllipsoidMatrix::from_information(&info_matrix(x, u))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCertificate {
    /// `n ln(kappa_max / n)`, clamped at zero.
    pub gap: f64,
    pub kappa_max: f64,
    pub argmax: usize,
}

/// Duality gap between `u` and the scaled dual point `(n / kappa_max) H`,
/// which is feasible for every index in `active` (all points when `None`).
pub fn duality_gap_certificate(
    x: &DesignMatrix,
    u: &DesignWeights,
    active: Option<&[usize]>,
) -> Result<GapCertificate> {
    let h = ellipsoid_from_weights(x, u)?;
    Ok(certificate_for(x, &h, active))
}

/// Certificate for a precomputed `H = (X U X^T)^{-1}`.
pub fn certificate_for(x: &DesignMatrix, h: &EllipsoidMatrix, active: Option<&[usize]>) -> GapCertificate {
    let all: Vec<usize>;
    let idx = match active {
        Some(a) => a,
        None => {
            all = (0..x.m()).collect();
            &all
        }
    };
    let kappas = h.kappas(x, idx);
    let (mut argmax, mut kappa_max) = (usize::MAX, f64::NEG_INFINITY);
    for (&i, &k) in idx.iter().zip(&kappas) {
        if k > kappa_max {
            kappa_max = k;
            argmax = i;
        }
    }
    GapCertificate { gap: gap_from_kappa(kappa_max, x.n()), kappa_max, argmax }
}

/// `n ln(max(kappa, n) / n)`.
pub fn gap_from_kappa(kappa_max: f64, n: usize) -> f64 {
    let nf = n as f64;
    if kappa_max <= nf {
        0.0
    } else {
        nf * (kappa_max / nf).ln()
    }
}
