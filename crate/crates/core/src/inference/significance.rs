//! Significance of a causation-entropy estimate.
//!
//! Exact covariances use a fixed threshold. Empirical data use a permutation
//! test: the present-state series of the source is shuffled in time while the
//! target futures and the conditioning series stay put, which rebuilds the
//! statistic under the null `C_{j→I|K} = 0`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{conditional_logdet_blocks, EstimatorContext, ScalarConditioner};
use crate::error::{OcseError, Result};
use crate::inference::{DataSource, EmpiricalData, SignificanceConfig};
use crate::linalg::dot;

/// Result of one significance assessment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub significant: bool,
    /// Empirical CDF of the null replicas at the observed value. `None` for
    /// exact data, and a partial count when the test stopped early.
    pub ecdf: Option<f64>,
    /// Number of permutation replicas evaluated.
    pub replicas: usize,
}

/// Statistic evaluator for a fixed target set `I` and conditioning set `K`.
#[derive(Debug, Clone)]
pub(crate) enum Evaluator<'a> {
    Scalar(ScalarConditioner<'a>),
    General { ctx: &'a EstimatorContext, targets: Vec<usize>, cond: Vec<usize> },
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(ctx: &'a EstimatorContext, targets: &[usize], cond: &[usize]) -> Result<Self> {
        if targets.len() == 1 {
            Ok(Self::Scalar(ScalarConditioner::new(ctx, targets[0], cond)?))
        } else {
            Ok(Self::General { ctx, targets: targets.to_vec(), cond: cond.to_vec() })
        }
    }

    pub(crate) fn targets(&self) -> Vec<usize> {
        match self {
            Self::Scalar(sc) => vec![sc.target()],
            Self::General { targets, .. } => targets.clone(),
        }
    }

    pub(crate) fn cond(&self) -> &[usize] {
        match self {
            Self::Scalar(sc) => sc.cond(),
            Self::General { cond, .. } => cond,
        }
    }

    /// `C_{j→I|K}` from the point estimates.
    pub(crate) fn statistic(&self, j: usize) -> Result<f64> {
        match self {
            Self::Scalar(sc) => sc.statistic(j),
            Self::General { ctx, targets, cond } => crate::entropy::causation_entropy(ctx, &[j], targets, cond),
        }
    }

    /// Statistic with the source's present-state series replaced by `source`.
    fn replica_statistic(&self, data: &EmpiricalData, source: &[f64]) -> Result<f64> {
        let t = data.len();
        let lag0 = (t - 1) as f64;
        let lag1 = (t - 2) as f64;
        // Φ(0)_jj is invariant under a permutation of the series.
        let s = dot(source, source) / lag0;
        match self {
            Self::Scalar(sc) => {
                let q: Vec<f64> = sc.cond().iter().map(|&k| dot(source, data.column(k)) / lag0).collect();
                let b = dot(&data.column(sc.target())[1..], &source[..t - 1]) / lag1;
                Ok(sc.statistic_from_parts(&q, s, b))
            }
            Self::General { ctx, targets, cond } => {
                let m = cond.len();
                let phi0_ii = DMatrix::from_fn(targets.len(), targets.len(), |a, b| ctx.phi0(targets[a], targets[b]));
                let phi1_ik = DMatrix::from_fn(targets.len(), m, |a, b| ctx.phi1(targets[a], cond[b]));
                let phi0_kk = DMatrix::from_fn(m, m, |a, b| ctx.phi0(cond[a], cond[b]));
                let mut phi0_ll = DMatrix::zeros(m + 1, m + 1);
                phi0_ll.view_mut((0, 0), (m, m)).copy_from(&phi0_kk);
                for (a, &k) in cond.iter().enumerate() {
                    let q = dot(source, data.column(k)) / lag0;
                    phi0_ll[(a, m)] = q;
                    phi0_ll[(m, a)] = q;
                }
                phi0_ll[(m, m)] = s;
                let mut phi1_il = DMatrix::zeros(targets.len(), m + 1);
                phi1_il.view_mut((0, 0), (targets.len(), m)).copy_from(&phi1_ik);
                for (a, &i) in targets.iter().enumerate() {
                    phi1_il[(a, m)] = dot(&data.column(i)[1..], &source[..t - 1]) / lag1;
                }
                let floor = ctx.floor();
                let num = conditional_logdet_blocks(&phi0_ii, &phi1_ik, &phi0_kk, floor)?;
                let den = conditional_logdet_blocks(&phi0_ii, &phi1_il, &phi0_ll, floor)?;
                Ok(0.5 * (num - den))
            }
        }
    }
}

/// Deterministic seed for replica `k` of the test `(j, I, K)`, independent of
/// execution order. `I` and `K` are hashed as sets.
pub fn replica_seed(master: u64, j: usize, targets: &[usize], cond: &[usize], k: usize) -> u64 {
    let mut targets = targets.to_vec();
    targets.sort_unstable();
    let mut cond = cond.to_vec();
    cond.sort_unstable();
    let mut h = splitmix64(master);
    h = splitmix64(h ^ j as u64);
    h = splitmix64(h ^ (targets.len() as u64 | 1 << 40));
    for v in targets {
        h = splitmix64(h ^ v as u64);
    }
    h = splitmix64(h ^ (cond.len() as u64 | 2 << 40));
    for v in cond {
        h = splitmix64(h ^ v as u64);
    }
    splitmix64(h ^ k as u64)
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Smallest count of replicas below the observed value that makes the test significant.
fn required_below(r: usize, theta: f64) -> usize {
    (0..=r).find(|&m| m as f64 / r as f64 > theta).unwrap_or(r + 1)
}

/// Permutation test of an observed `C_{j→I|K}` computed from the unpermuted data.
///
/// Each of the `r` replicas shuffles the present-state series of `j` with its
/// own derived seed and recomputes only the covariance entries involving `j`.
/// The estimate is significant when the fraction of replicas strictly below
/// `observed` exceeds `theta`.
pub fn permutation_test(
    data: &EmpiricalData,
    j: usize,
    targets: &[usize],
    cond: &[usize],
    observed: f64,
    cfg: &SignificanceConfig,
) -> Result<TestOutcome> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(OcseError::InvalidParameter("target set I must be nonempty".into()));
    }
    let eval = Evaluator::new(data.context(), targets, cond)?;
    run_permutations(data, &eval, j, observed, cfg, false)
}

fn run_permutations(
    data: &EmpiricalData,
    eval: &Evaluator<'_>,
    j: usize,
    observed: f64,
    cfg: &SignificanceConfig,
    early_stop: bool,
) -> Result<TestOutcome> {
    let n = data.context().n();
    if j >= n {
        return Err(OcseError::IndexOutOfRange { index: j, n });
    }
    if data.context().phi0(j, j) <= data.context().floor() {
        return Err(OcseError::Degenerate(format!("series of node {j} is constant")));
    }
    let r = cfg.r;
    let needed = required_below(r, cfg.theta);
    let targets = eval.targets();
    let original = data.column(j);
    let mut shuffled = original.to_vec();
    let mut below = 0usize;
    let mut done = 0usize;
    for k in 0..r {
        shuffled.copy_from_slice(original);
        let mut rng = ChaCha8Rng::seed_from_u64(replica_seed(cfg.seed, j, &targets, eval.cond(), k));
        shuffled.shuffle(&mut rng);
        let stat = eval.replica_statistic(data, &shuffled)?;
        done += 1;
        if stat < observed {
            below += 1;
        }
        if early_stop && (below >= needed || done - below > r - needed.min(r)) {
            break;
        }
    }
    let ecdf = below as f64 / r as f64;
    Ok(TestOutcome { significant: below >= needed, ecdf: Some(ecdf), replicas: done })
}

/// Significance decision used by the inference algorithms.
///
/// Empirical data stop the permutation loop as soon as the decision is fixed,
/// which gives the same decision as the full test.
pub(crate) fn assess(
    source: &DataSource,
    eval: &Evaluator<'_>,
    j: usize,
    observed: f64,
    cfg: &SignificanceConfig,
) -> Result<TestOutcome> {
    match source {
        DataSource::Exact(_) => {
            Ok(TestOutcome { significant: observed > cfg.exact_tolerance, ecdf: None, replicas: 0 })
        }
        DataSource::Empirical(data) => {
            // Replicas are never negative, so nothing lies strictly below a nonpositive value.
            if observed <= 0.0 {
                return Ok(TestOutcome { significant: false, ecdf: Some(0.0), replicas: 0 });
            }
            run_permutations(data, eval, j, observed, cfg, cfg.early_stop)
        }
    }
}
