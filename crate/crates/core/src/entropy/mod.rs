//! Closed-form Gaussian entropies: causation entropy, transfer entropy and
//! conditional Granger causality from lagged covariances. All values are in nats.

pub mod discrete;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::covariance::LaggedCovariance;
use crate::error::{OcseError, Result};
use crate::linalg::{self, cholesky, cholesky_with_jitter, dot, forward_solve, forward_solve_matrix};

/// Floor applied to conditional variances (and determinants) before taking logs.
pub const DEFAULT_DEGENERATE_FLOOR: f64 = 1e-12;

/// Anything that can evaluate `C_{J→I|K}` over a fixed node set.
pub trait CausationEntropySource {
    fn node_count(&self) -> usize;
    fn causation_entropy(&self, sources: &[usize], targets: &[usize], cond: &[usize]) -> Result<f64>;
}

/// Lagged covariances plus the degeneracy policy used for every entropy evaluation.
#[derive(Debug, Clone)]
pub struct EstimatorContext {
    cov: LaggedCovariance,
    floor: f64,
}

impl EstimatorContext {
    pub fn new(cov: LaggedCovariance) -> Self {
        Self { cov, floor: DEFAULT_DEGENERATE_FLOOR }
    }

    pub fn with_floor(cov: LaggedCovariance, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(OcseError::InvalidParameter("degenerate floor must be positive".into()));
        }
        Ok(Self { cov, floor })
    }

    pub fn cov(&self) -> &LaggedCovariance {
        &self.cov
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn n(&self) -> usize {
        self.cov.n()
    }

    pub fn phi0(&self, i: usize, j: usize) -> f64 {
        self.cov.phi0[(i, j)]
    }

    pub fn phi1(&self, i: usize, j: usize) -> f64 {
        self.cov.phi1[(i, j)]
    }

    fn check_nodes(&self, nodes: &[usize]) -> Result<()> {
        let n = self.n();
        match nodes.iter().find(|&&v| v >= n) {
            Some(&index) => Err(OcseError::IndexOutOfRange { index, n }),
            None => Ok(()),
        }
    }

    /// An empirical `Φ̂(0)` has rank at most `T − 1`; conditioning on that many
    /// nodes cannot produce a meaningful residual.
    fn check_sample_budget(&self, conditioning: usize) -> Result<()> {
        if let Some(t) = self.cov.sample_count() {
            if conditioning + 1 >= t {
                return Err(OcseError::Degenerate(format!(
                    "conditioning on {conditioning} nodes with only {t} samples"
                )));
            }
        }
        Ok(())
    }

    /// Cholesky factor of `Φ(0)_SS` under the jitter policy.
    pub fn factor(&self, set: &[usize]) -> Result<DMatrix<f64>> {
        self.check_nodes(set)?;
        self.check_sample_budget(set.len())?;
        let m = DMatrix::from_fn(set.len(), set.len(), |a, b| self.phi0(set[a], set[b]));
        cholesky_with_jitter(&m)
    }

    /// `log det[Φ(0)_II − Φ(1)_IS Φ(0)_SS^{-1} Φ(1)_IS^T]`, floored.
    fn conditional_logdet(&self, targets: &[usize], set: &[usize]) -> Result<f64> {
        self.check_sample_budget(set.len())?;
        let phi0_ii = DMatrix::from_fn(targets.len(), targets.len(), |a, b| self.phi0(targets[a], targets[b]));
        let phi1_is = DMatrix::from_fn(targets.len(), set.len(), |t, s| self.phi1(targets[t], set[s]));
        let phi0_ss = DMatrix::from_fn(set.len(), set.len(), |a, b| self.phi0(set[a], set[b]));
        conditional_logdet_blocks(&phi0_ii, &phi1_is, &phi0_ss, self.floor)
    }
}

/// Floored `log det[Φ0_II − Φ1_IS Φ0_SS⁻¹ Φ1_IS^T]` from explicit blocks.
pub(crate) fn conditional_logdet_blocks(
    phi0_ii: &DMatrix<f64>,
    phi1_is: &DMatrix<f64>,
    phi0_ss: &DMatrix<f64>,
    floor: f64,
) -> Result<f64> {
    let mut cond = phi0_ii.clone();
    if phi0_ss.nrows() > 0 {
        let l = cholesky_with_jitter(phi0_ss)?;
        let y = forward_solve_matrix(&l, &phi1_is.transpose());
        cond -= y.tr_mul(&y);
    }
    if cond.nrows() == 1 {
        return Ok(cond[(0, 0)].max(floor).ln());
    }
    Ok(match cholesky(&linalg::symmetrize(&cond)) {
        Some(l) => linalg::logdet_from_factor(&l).max(floor.ln()),
        None => floor.ln(),
    })
}

impl CausationEntropySource for EstimatorContext {
    fn node_count(&self) -> usize {
        self.n()
    }

    fn causation_entropy(&self, sources: &[usize], targets: &[usize], cond: &[usize]) -> Result<f64> {
        causation_entropy(self, sources, targets, cond)
    }
}

/// Differential entropy `½ log det Σ + (k/2) log(2πe)` of a Gaussian.
pub fn gaussian_entropy(sigma: &DMatrix<f64>) -> Result<f64> {
    let k = sigma.nrows();
    if sigma.ncols() != k || k == 0 {
        return Err(OcseError::DimensionMismatch("covariance must be square and nonempty".into()));
    }
    let logdet = linalg::logdet_spd(sigma)?;
    Ok(0.5 * logdet + 0.5 * k as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln())
}

/// `K` followed by the members of `J` not already in `K`.
pub(crate) fn ordered_union(cond: &[usize], sources: &[usize]) -> Vec<usize> {
    let mut out = cond.to_vec();
    for &j in sources {
        if !out.contains(&j) {
            out.push(j);
        }
    }
    out
}

/// Causation entropy `C_{J→I|K}` of the Gaussian process:
///
/// `½ log( det[Φ(0)_II − Φ(1)_IK Φ(0)_KK⁻¹ Φ(1)_IK^T] / det[Φ(0)_II − Φ(1)_IL Φ(0)_LL⁻¹ Φ(1)_IL^T] )`
/// with `L = K ∪ J`. An empty `K` leaves the bare `Φ(0)_II` in the numerator.
pub fn causation_entropy(ctx: &EstimatorContext, sources: &[usize], targets: &[usize], cond: &[usize]) -> Result<f64> {
    if targets.is_empty() {
        return Err(OcseError::InvalidParameter("target set I must be nonempty".into()));
    }
    if sources.is_empty() {
        return Err(OcseError::InvalidParameter("source set J must be nonempty".into()));
    }
    ctx.check_nodes(sources)?;
    ctx.check_nodes(targets)?;
    ctx.check_nodes(cond)?;
    let joint = ordered_union(cond, sources);
    if joint.len() == cond.len() {
        return Ok(0.0);
    }
    let num = ctx.conditional_logdet(targets, cond)?;
    let den = ctx.conditional_logdet(targets, &joint)?;
    Ok(0.5 * (num - den))
}

/// Transfer entropy `T_{j→i} = C_{j→i|{i}}` through the closed form
/// `½ log(1 + α/(β − α))` with
/// `α = (Φ0_ii Φ1_ij − Φ0_ij Φ1_ii)²` and
/// `β = (Φ0_ii² − Φ1_ii²)(Φ0_ii Φ0_jj − Φ0_ij²)`.
pub fn transfer_entropy(ctx: &EstimatorContext, j: usize, i: usize) -> Result<f64> {
    ctx.check_nodes(&[i, j])?;
    if i == j {
        return Ok(0.0);
    }
    let (alpha, beta) = te_alpha_beta(ctx, j, i);
    let gap = beta - alpha;
    if !(gap > ctx.floor) {
        return Err(OcseError::Degenerate(format!(
            "transfer entropy {j}->{i}: beta - alpha = {gap:e} below floor"
        )));
    }
    Ok(0.5 * (beta / gap).ln())
}

/// The `(α, β)` pair of the transfer-entropy closed form.
pub fn te_alpha_beta(ctx: &EstimatorContext, j: usize, i: usize) -> (f64, f64) {
    let (p0ii, p0jj, p0ij) = (ctx.phi0(i, i), ctx.phi0(j, j), ctx.phi0(i, j));
    let (p1ij, p1ii) = (ctx.phi1(i, j), ctx.phi1(i, i));
    let alpha = (p0ii * p1ij - p0ij * p1ii).powi(2);
    let beta = (p0ii * p0ii - p1ii * p1ii) * (p0ii * p0jj - p0ij * p0ij);
    (alpha, beta)
}

/// Conditional Granger causality with full conditioning: `2 C_{j→i|V−{j}}`.
pub fn conditional_granger(ctx: &EstimatorContext, j: usize, i: usize) -> Result<f64> {
    let n = ctx.n();
    if n < 2 {
        return Err(OcseError::InvalidParameter("conditional Granger needs at least 2 nodes".into()));
    }
    ctx.check_nodes(&[i, j])?;
    let rest: Vec<usize> = (0..n).filter(|&k| k != j).collect();
    Ok(2.0 * causation_entropy(ctx, &[j], &[i], &rest)?)
}

/// Evaluates `C_{j→i|K}` for a single target `i` and a fixed conditioning set
/// `K`, for any candidate source `j`.
///
/// The factor of `Φ(0)_KK` and the target residual are computed once; adding a
/// source is a rank-one extension of that factor. The permutation test feeds
/// it recomputed source covariances through [`ScalarConditioner::statistic_from_parts`].
#[derive(Debug, Clone)]
pub struct ScalarConditioner<'a> {
    ctx: &'a EstimatorContext,
    target: usize,
    cond: Vec<usize>,
    factor: Option<Arc<DMatrix<f64>>>,
    y: DVector<f64>,
    residual: f64,
}

impl<'a> ScalarConditioner<'a> {
    pub fn new(ctx: &'a EstimatorContext, target: usize, cond: &[usize]) -> Result<Self> {
        let factor = if cond.is_empty() { None } else { Some(Arc::new(ctx.factor(cond)?)) };
        Self::with_factor(ctx, target, cond, factor)
    }

    /// Reuses a factor of `Φ(0)_KK` shared between several targets.
    pub fn with_factor(
        ctx: &'a EstimatorContext,
        target: usize,
        cond: &[usize],
        factor: Option<Arc<DMatrix<f64>>>,
    ) -> Result<Self> {
        ctx.check_nodes(&[target])?;
        ctx.check_nodes(cond)?;
        // Budget for the joint set K ∪ {j} evaluated later.
        ctx.check_sample_budget(cond.len() + 1)?;
        let b: Vec<f64> = cond.iter().map(|&k| ctx.phi1(target, k)).collect();
        let y = match &factor {
            Some(l) => forward_solve(l, &b),
            None => DVector::zeros(0),
        };
        let residual = ctx.phi0(target, target) - y.norm_squared();
        Ok(Self { ctx, target, cond: cond.to_vec(), factor, y, residual })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn cond(&self) -> &[usize] {
        &self.cond
    }

    /// Floored residual variance of the target given `K`.
    pub fn residual_variance(&self) -> f64 {
        self.residual.max(self.ctx.floor)
    }

    /// `C_{j→i|K}` from the context's covariances.
    pub fn statistic(&self, j: usize) -> Result<f64> {
        self.ctx.check_nodes(&[j])?;
        if self.cond.contains(&j) {
            return Ok(0.0);
        }
        let q: Vec<f64> = self.cond.iter().map(|&k| self.ctx.phi0(k, j)).collect();
        Ok(self.statistic_from_parts(&q, self.ctx.phi0(j, j), self.ctx.phi1(self.target, j)))
    }

    /// `C_{j→i|K}` for a source described by its covariances: `q = Φ(0)_{K,j}`,
    /// `s = Φ(0)_jj` and `b = Φ(1)_ij`.
    pub fn statistic_from_parts(&self, q: &[f64], s: f64, b: f64) -> f64 {
        let (l_dot_y, l_norm2) = match &self.factor {
            Some(l) => {
                let lq = forward_solve(l, q);
                (dot(lq.as_slice(), self.y.as_slice()), lq.norm_squared())
            }
            None => (0.0, 0.0),
        };
        let d2 = s - l_norm2;
        if !(d2 > f64::EPSILON * s.abs().max(f64::MIN_POSITIVE)) {
            // Source is a linear combination of K: it adds nothing.
            return 0.0;
        }
        let gain = (b - l_dot_y).powi(2) / d2;
        let num = self.residual.max(self.ctx.floor);
        let den = (self.residual - gain).max(self.ctx.floor);
        0.5 * (num / den).ln()
    }
}
