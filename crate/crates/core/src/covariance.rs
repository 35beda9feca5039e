//! Exact stationary covariances from the discrete Lyapunov equation, and
//! their empirical counterparts from finite series.

use nalgebra::DMatrix;

use crate::error::{OcseError, Result};
use crate::linalg::{max_abs, symmetrize};
use crate::network::spectral_radius;
use crate::process::TimeSeries;

/// Default convergence tolerance on successive Lyapunov iterates.
pub const DEFAULT_LYAPUNOV_TOL: f64 = 1e-14;
/// Default iteration cap for the Lyapunov solver.
pub const DEFAULT_LYAPUNOV_MAX_ITER: usize = 10_000;
/// Residual bound enforced on every returned exact solution (relative to the
/// solution scale once it exceeds 1).
pub const LYAPUNOV_RESIDUAL_BOUND: f64 = 1e-10;
/// Largest dimension accepted by the Kronecker solver.
pub const DIRECT_SOLVER_MAX_N: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceSource {
    Exact,
    /// Estimated from a series of the given length.
    Empirical { samples: usize },
}

/// Lag-0 and lag-1 covariances `Φ(0)` and `Φ(1)`.
#[derive(Debug, Clone)]
pub struct LaggedCovariance {
    pub phi0: DMatrix<f64>,
    pub phi1: DMatrix<f64>,
    pub source: CovarianceSource,
}

impl LaggedCovariance {
    pub fn new(phi0: DMatrix<f64>, phi1: DMatrix<f64>, source: CovarianceSource) -> Result<Self> {
        let n = phi0.nrows();
        if phi0.ncols() != n || phi1.nrows() != n || phi1.ncols() != n {
            return Err(OcseError::DimensionMismatch("Φ(0) and Φ(1) must both be n x n".into()));
        }
        if phi0.iter().chain(phi1.iter()).any(|v| !v.is_finite()) {
            return Err(OcseError::NonFinite);
        }
        Ok(Self { phi0, phi1, source })
    }

    /// Stationary covariances of `X_t = A X_{t-1} + ξ_t`, `ξ_t ~ N(0, S)`.
    pub fn exact(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<Self> {
        let phi0 = solve_lyapunov(a, s, DEFAULT_LYAPUNOV_TOL, DEFAULT_LYAPUNOV_MAX_ITER)?;
        let phi1 = shifted_covariance(a, &phi0, 1);
        Self::new(phi0, phi1, CovarianceSource::Exact)
    }

    pub fn n(&self) -> usize {
        self.phi0.nrows()
    }

    pub fn is_exact(&self) -> bool {
        self.source == CovarianceSource::Exact
    }

    pub fn sample_count(&self) -> Option<usize> {
        match self.source {
            CovarianceSource::Exact => None,
            CovarianceSource::Empirical { samples } => Some(samples),
        }
    }

    /// True when some node has (numerically) zero variance.
    pub fn is_degenerate(&self, floor: f64) -> bool {
        (0..self.n()).any(|i| self.phi0[(i, i)] <= floor)
    }
}

/// Solves `A Φ A^T − Φ + S = 0` by the doubling form of the fixed-point
/// iteration `Φ ← A Φ A^T + S`: `Φ ← Φ + A_k Φ A_k^T`, `A_{k+1} = A_k²`.
pub fn solve_lyapunov(a: &DMatrix<f64>, s: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
    check_square_pair(a, s)?;
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(OcseError::Unstable(rho));
    }
    let mut phi = s.clone();
    let mut ak = a.clone();
    let mut iter = 0;
    loop {
        if iter >= max_iter {
            return Err(OcseError::NoConvergence(max_iter));
        }
        iter += 1;
        let delta = &ak * &phi * ak.transpose();
        phi += &delta;
        if max_abs(&delta) < tol {
            break;
        }
        ak = &ak * &ak;
    }
    let mut phi = symmetrize(&phi);
    // Plain fixed-point sweeps tighten the residual if doubling left rounding behind.
    while lyapunov_residual(a, &phi, s) > residual_bound(&phi) {
        if iter >= max_iter {
            return Err(OcseError::NoConvergence(max_iter));
        }
        iter += 1;
        phi = symmetrize(&(a * &phi * a.transpose() + s));
    }
    Ok(phi)
}

fn residual_bound(phi: &DMatrix<f64>) -> f64 {
    LYAPUNOV_RESIDUAL_BOUND * max_abs(phi).max(1.0)
}

/// `||A Φ A^T − Φ + S||_max`.
pub fn lyapunov_residual(a: &DMatrix<f64>, phi: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    max_abs(&(a * phi * a.transpose() - phi + s))
}

/// Kronecker-form solve `(I − A⊗A) vec Φ = vec S`; an independent cross-check
/// for [`solve_lyapunov`] on small problems.
pub fn solve_lyapunov_direct(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_pair(a, s)?;
    let n = a.nrows();
    if n > DIRECT_SOLVER_MAX_N {
        return Err(OcseError::TooLarge(n));
    }
    let kron = a.kronecker(a);
    let system = DMatrix::<f64>::identity(n * n, n * n) - kron;
    let rhs = nalgebra::DVector::from_column_slice(s.as_slice());
    let lu = system.lu();
    let sol = lu.solve(&rhs).ok_or(OcseError::Singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(OcseError::Singular);
    }
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice())))
}

fn check_square_pair(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n || s.nrows() != n || s.ncols() != n {
        return Err(OcseError::DimensionMismatch("A and S must be square of equal size".into()));
    }
    Ok(())
}

/// `Φ(τ) = A^τ Φ(0)`.
pub fn shifted_covariance(a: &DMatrix<f64>, phi0: &DMatrix<f64>, tau: usize) -> DMatrix<f64> {
    let mut out = phi0.clone();
    for _ in 0..tau {
        out = a * out;
    }
    out
}

/// Series with the full-sample mean of every node removed.
pub fn center(ts: &TimeSeries) -> DMatrix<f64> {
    let mut x = ts.samples().clone();
    let t = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / t;
        col.add_scalar_mut(-mean);
    }
    x
}

/// Sample lag-0 and lag-1 covariances after mean removal:
/// `Φ̂(0) = Σ_t x_t x_t^T / (T−1)` (symmetrized) and
/// `Φ̂(1) = Σ_{t<T} x_{t+1} x_t^T / (T−2)`.
pub fn estimate_covariances(ts: &TimeSeries) -> Result<LaggedCovariance> {
    estimate_from_centered(&center(ts))
}

pub(crate) fn estimate_from_centered(x: &DMatrix<f64>) -> Result<LaggedCovariance> {
    let t = x.nrows();
    if t < 3 {
        return Err(OcseError::TooFewSamples(format!("covariance estimation needs T >= 3, got {t}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(OcseError::NonFinite);
    }
    let phi0 = symmetrize(&(x.tr_mul(x) / (t - 1) as f64));
    let next = x.rows(1, t - 1);
    let prev = x.rows(0, t - 1);
    let phi1 = next.tr_mul(&prev) / (t - 2) as f64;
    LaggedCovariance::new(phi0, phi1, CovarianceSource::Empirical { samples: t })
}

/// Rows and columns of `m` selected in the given order.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
    for &r in rows {
        if r >= m.nrows() {
            return Err(OcseError::IndexOutOfRange { index: r, n: m.nrows() });
        }
    }
    for &c in cols {
        if c >= m.ncols() {
            return Err(OcseError::IndexOutOfRange { index: c, n: m.ncols() });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]))
}
