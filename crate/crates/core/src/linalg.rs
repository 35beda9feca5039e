//! Small dense helpers shared by the covariance and entropy code.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. The Cholesky routine is
//! hand-rolled so the pivot threshold and the jitter retry are under our control.

use nalgebra::{DMatrix, DVector};

use crate::error::{OcseError, Result};

/// Relative pivot threshold (times dimension) below which a factorization is rejected.
const PIVOT_REL_EPS: f64 = f64::EPSILON;

/// Jitter added on retry, as a multiple of `trace / n`.
pub const JITTER_SCALE: f64 = 1e-10;

/// Lower-triangular Cholesky factor, or `None` when a pivot falls below the
/// relative threshold.
pub fn cholesky(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let max_diag = (0..n).map(|i| m[(i, i)].abs()).fold(0.0_f64, f64::max);
    let min_pivot = PIVOT_REL_EPS * (n.max(1) as f64) * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > min_pivot) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Cholesky with one jittered retry (`1e-10 * trace / n` on the diagonal).
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(l) = cholesky(m) {
        return Ok(l);
    }
    let n = m.nrows();
    let jitter = JITTER_SCALE * m.trace() / n as f64;
    if jitter > 0.0 && jitter.is_finite() {
        let mut jittered = m.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(l) = cholesky(&jittered) {
            return Ok(l);
        }
    }
    Err(OcseError::Degenerate(format!(
        "{n}x{n} matrix is not positive definite within the jitter budget"
    )))
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_solve(l: &DMatrix<f64>, b: &[f64]) -> DVector<f64> {
    let n = l.nrows();
    let mut y = DVector::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves `L Y = B` column by column.
pub fn forward_solve_matrix(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::zeros(b.nrows(), b.ncols());
    for c in 0..b.ncols() {
        let col: Vec<f64> = b.column(c).iter().copied().collect();
        out.set_column(c, &forward_solve(l, &col));
    }
    out
}

/// `log det` of a symmetric positive-definite matrix through its Cholesky factor.
pub fn logdet_spd(m: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky_with_jitter(m)?;
    Ok(logdet_from_factor(&l))
}

pub fn logdet_from_factor(l: &DMatrix<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Averages `m` with its transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
