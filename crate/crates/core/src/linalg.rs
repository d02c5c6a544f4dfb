//! Small dense kernels: Cholesky with a singularity floor, jittered
//! Cholesky for systems that are positive definite by construction, and
//! triangular solves.

use nalgebra::{DMatrix, DVector};

/// Pivots below this fraction of the largest diagonal entry mark a matrix as
/// numerically singular.
pub const PIVOT_FLOOR: f64 = 1e-13;

const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;

fn factor_with_floor(a: &DMatrix<f64>, shift: f64, floor: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + shift;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

fn max_diag(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)]).fold(0.0, f64::max)
}

/// Lower Cholesky factor, or `None` when some pivot falls below
/// [`PIVOT_FLOOR`] times the largest diagonal entry.
pub fn cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    debug_assert!(a.is_square());
    let scale = max_diag(a);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    factor_with_floor(a, 0.0, PIVOT_FLOOR * scale)
}

/// Cholesky for matrices that are positive definite in exact arithmetic but
/// may lose definiteness to rounding. Tries the plain factorization, then adds
/// `delta * trace/n * I` for `delta = 1e-12, 1e-11, ..., 1e-6`.
///
/// Returns the factor and the absolute shift that was applied.
pub fn cholesky_jittered(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    if let Some(l) = factor_with_floor(a, 0.0, 0.0) {
        return Some((l, 0.0));
    }
    let scale = a.trace() / n as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let mut delta = JITTER_START;
    while delta <= JITTER_MAX * (1.0 + 1e-9) {
        let shift = delta * scale;
        if let Some(l) = factor_with_floor(a, shift, 0.0) {
            return Some((l, shift));
        }
        delta *= 10.0;
    }
    None
}

/// `ln det A` from the Cholesky factor of `A`.
pub fn log_det(l: &DMatrix<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Solves `L y = b` in place.
pub fn forward_subst(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L^T x = y` in place.
pub fn backward_subst_t(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L L^T x = b`.
pub fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut x = b.clone();
    forward_subst(l, x.as_mut_slice());
    backward_subst_t(l, x.as_mut_slice());
    x
}

/// `(L L^T)^{-1}`, symmetrized.
pub fn chol_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        forward_subst(l, &mut col);
        backward_subst_t(l, &mut col);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    symmetrize(&mut inv);
    inv
}

/// `||L^T x||^2`, i.e. `x^T (L L^T) x`.
#[inline]
pub fn quad_form_factor(l: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = l.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        let mut s = 0.0;
        for i in j..n {
            s += l[(i, j)] * x[i];
        }
        acc += s * s;
    }
    acc
}

/// `x^T A y` for a dense square `A`.
#[inline]
pub fn bilinear(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            s += x[i] * a[(i, j)];
        }
        acc += s * y[j];
    }
    acc
}

/// `A x` for a dense square `A`.
#[inline]
pub fn mat_vec(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let n = a.nrows();
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in 0..n {
        let xj = x[j];
        for i in 0..n {
            out[i] += a[(i, j)] * xj;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Adds `w * x x^T` to `a`.
#[inline]
pub fn add_outer(a: &mut DMatrix<f64>, x: &[f64], w: f64) {
    let n = a.nrows();
    for j in 0..n {
        let wx = w * x[j];
        for i in 0..n {
            a[(i, j)] += wx * x[i];
        }
    }
}

/// Largest absolute entry of `a - b` divided by the largest absolute entry of `b`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
}
