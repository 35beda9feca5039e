//! Causal parent inference: oCSE (aggregative discovery followed by
//! progressive removal), the transfer-entropy and conditional-Granger
//! baselines, and brute-force verification on exact covariances.

pub mod brute;
pub mod ocse;
pub mod significance;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{center, estimate_from_centered, LaggedCovariance};
use crate::entropy::{EstimatorContext, ScalarConditioner};
use crate::error::{OcseError, Result};
use crate::network::Network;
use crate::process::TimeSeries;

pub use brute::brute_force_parents;
pub use ocse::{aggregative_discovery, infer_parents_ocse, progressive_removal};
pub use significance::{permutation_test, replica_seed, TestOutcome};

use significance::{assess, Evaluator};

/// Permutation-test settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    /// Number of permutation replicas.
    pub r: usize,
    /// Significance level in (0, 1).
    pub theta: f64,
    pub seed: u64,
    /// Threshold replacing the permutation test on exact covariances.
    pub exact_tolerance: f64,
    /// Stop a permutation test once its decision can no longer change.
    pub early_stop: bool,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self { r: 100, theta: 0.99, seed: 0, exact_tolerance: 1e-10, early_stop: true }
    }
}

impl SignificanceConfig {
    pub fn new(r: usize, theta: f64, seed: u64) -> Result<Self> {
        let cfg = Self { r, theta, seed, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(OcseError::InvalidParameter("permutation count r must be at least 1".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(OcseError::InvalidParameter(format!("theta must lie in (0,1), got {}", self.theta)));
        }
        if !(self.exact_tolerance >= 0.0) {
            return Err(OcseError::InvalidParameter("exact tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Sample covariances together with the mean-removed series they came from,
/// which the permutation test needs.
#[derive(Debug, Clone)]
pub struct EmpiricalData {
    ctx: EstimatorContext,
    centered: DMatrix<f64>,
}

impl EmpiricalData {
    pub fn new(ts: &TimeSeries) -> Result<Self> {
        let centered = center(ts);
        let cov = estimate_from_centered(&centered)?;
        Ok(Self { ctx: EstimatorContext::new(cov), centered })
    }

    pub fn context(&self) -> &EstimatorContext {
        &self.ctx
    }

    /// Mean-removed series of `node`.
    pub fn column(&self, node: usize) -> &[f64] {
        let t = self.centered.nrows();
        &self.centered.as_slice()[node * t..(node + 1) * t]
    }

    pub fn len(&self) -> usize {
        self.centered.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.nrows() == 0
    }
}

/// Where the covariances come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Exact stationary covariances; significance is a fixed threshold.
    Exact(EstimatorContext),
    /// Sample covariances; significance is a permutation test.
    Empirical(EmpiricalData),
}

impl DataSource {
    pub fn exact(cov: LaggedCovariance) -> Result<Self> {
        if !cov.is_exact() {
            return Err(OcseError::InvalidParameter("exact source needs exact covariances".into()));
        }
        Ok(Self::Exact(EstimatorContext::new(cov)))
    }

    /// Exact covariances of `X_t = A X_{t-1} + ξ_t` with unit noise.
    pub fn from_network(net: &Network) -> Result<Self> {
        let s = DMatrix::identity(net.n(), net.n());
        Self::exact(LaggedCovariance::exact(net.weights(), &s)?)
    }

    pub fn from_series(ts: &TimeSeries) -> Result<Self> {
        Ok(Self::Empirical(EmpiricalData::new(ts)?))
    }

    pub fn context(&self) -> &EstimatorContext {
        match self {
            Self::Exact(ctx) => ctx,
            Self::Empirical(data) => data.context(),
        }
    }

    pub fn n(&self) -> usize {
        self.context().n()
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Self::Exact(_))
    }
}

/// Inference method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ocse,
    #[serde(rename = "te")]
    TransferEntropy,
    Granger,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ocse, Method::TransferEntropy, Method::Granger];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ocse => "ocse",
            Method::TransferEntropy => "te",
            Method::Granger => "granger",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = OcseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ocse" => Ok(Method::Ocse),
            "te" | "transfer_entropy" | "transfer-entropy" => Ok(Method::TransferEntropy),
            "granger" => Ok(Method::Granger),
            other => Err(OcseError::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Discovery,
    Removal,
}

/// One significance decision made while inferring a parent set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub phase: Phase,
    pub candidate: usize,
    pub statistic: f64,
    pub significant: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ecdf: Option<f64>,
}

/// Record of one run of the two oCSE phases for a target set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryTrace {
    pub target: Vec<usize>,
    pub steps: Vec<TraceStep>,
    /// Output of aggregative discovery, in insertion order.
    pub discovered: Vec<usize>,
    /// Output of progressive removal, in insertion order.
    pub pruned: Vec<usize>,
}

impl DiscoveryTrace {
    pub fn discovery_steps(&self) -> impl Iterator<Item = &TraceStep> {
        self.steps.iter().filter(|s| s.phase == Phase::Discovery)
    }

    pub fn removal_steps(&self) -> impl Iterator<Item = &TraceStep> {
        self.steps.iter().filter(|s| s.phase == Phase::Removal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub statistic: f64,
}

/// Inferred parent sets of every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredNetwork {
    pub method: Method,
    pub n: usize,
    /// Sorted by target, then source.
    pub edges: Vec<Edge>,
    #[serde(rename = "per_node_traces", skip_serializing_if = "Option::is_none", default)]
    pub traces: Option<Vec<DiscoveryTrace>>,
    /// Targets whose tests hit a degenerate covariance and were skipped.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub degenerate_nodes: Vec<usize>,
}

impl InferredNetwork {
    /// Sorted parent set of node `i`.
    pub fn parents(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.target == i).map(|e| e.source).collect()
    }

    pub fn parent_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.n];
        for e in &self.edges {
            sets[e.target].push(e.source);
        }
        sets
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_nodes.is_empty()
    }

    /// Unit-weight network with the inferred links.
    pub fn to_network(&self) -> Result<Network> {
        Network::from_parent_sets(&self.parent_sets())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s)?;
        if let Some(e) = net.edges.iter().find(|e| e.source >= net.n || e.target >= net.n) {
            return Err(OcseError::IndexOutOfRange { index: e.source.max(e.target), n: net.n });
        }
        Ok(net)
    }
}

/// Infers the whole network with the chosen method.
///
/// Nodes are processed in parallel; results are merged by node index, so the
/// output depends only on the data and `cfg`. Degenerate tests mark their
/// target in `degenerate_nodes` instead of failing the run.
pub fn infer_network(source: &DataSource, method: Method, cfg: &SignificanceConfig) -> Result<InferredNetwork> {
    cfg.validate()?;
    let n = source.n();
    let mut net = InferredNetwork { method, n, edges: Vec::new(), traces: None, degenerate_nodes: Vec::new() };
    match method {
        Method::Ocse => {
            let traces: Vec<DiscoveryTrace> =
                (0..n).into_par_iter().map(|i| infer_parents_ocse(source, i, cfg)).collect::<Result<_>>()?;
            for trace in &traces {
                let i = trace.target[0];
                let mut parents: Vec<(usize, f64)> = trace
                    .pruned
                    .iter()
                    .map(|&p| {
                        let stat = trace
                            .removal_steps()
                            .filter(|s| s.candidate == p)
                            .last()
                            .map_or(0.0, |s| s.statistic);
                        (p, stat)
                    })
                    .collect();
                parents.sort_by_key(|&(p, _)| p);
                net.edges.extend(parents.into_iter().map(|(source, statistic)| Edge { source, target: i, statistic }));
            }
            net.traces = Some(traces);
        }
        Method::TransferEntropy => {
            let rows: Vec<Result<Vec<Edge>>> = (0..n).into_par_iter().map(|i| te_parents(source, i, cfg)).collect();
            collect_rows(&mut net, rows)?;
        }
        Method::Granger => {
            let per_source: Vec<Vec<Result<Option<f64>>>> =
                (0..n).into_par_iter().map(|j| granger_from_source(source, j, cfg)).collect::<Result<_>>()?;
            let mut rows: Vec<Result<Vec<Edge>>> = (0..n).map(|_| Ok(Vec::new())).collect();
            for (j, results) in per_source.into_iter().enumerate() {
                for (i, res) in results.into_iter().enumerate() {
                    let row = &mut rows[i];
                    match (res, row.as_mut()) {
                        (Ok(Some(statistic)), Ok(edges)) => edges.push(Edge { source: j, target: i, statistic }),
                        (Ok(None), _) | (_, Err(_)) => {}
                        (Err(e), Ok(_)) => *row = Err(e),
                    }
                }
            }
            collect_rows(&mut net, rows)?;
        }
    }
    Ok(net)
}

fn collect_rows(net: &mut InferredNetwork, rows: Vec<Result<Vec<Edge>>>) -> Result<()> {
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Ok(edges) => net.edges.extend(edges),
            Err(OcseError::Degenerate(_)) => net.degenerate_nodes.push(i),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn te_parents(source: &DataSource, i: usize, cfg: &SignificanceConfig) -> Result<Vec<Edge>> {
    let ctx = source.context();
    let eval = Evaluator::Scalar(ScalarConditioner::new(ctx, i, &[i])?);
    let mut edges = Vec::new();
    for j in (0..ctx.n()).filter(|&j| j != i) {
        let stat = eval.statistic(j)?;
        if assess(source, &eval, j, stat, cfg)?.significant {
            edges.push(Edge { source: j, target: i, statistic: stat });
        }
    }
    Ok(edges)
}

/// Granger statistic `2 C_{j→i|V−{j}}` for every target, when significant.
/// The factor of `Φ(0)` over `V−{j}` is shared by all targets.
fn granger_from_source(source: &DataSource, j: usize, cfg: &SignificanceConfig) -> Result<Vec<Result<Option<f64>>>> {
    let ctx = source.context();
    let n = ctx.n();
    let rest: Vec<usize> = (0..n).filter(|&k| k != j).collect();
    let factor = if rest.is_empty() {
        None
    } else {
        match ctx.factor(&rest) {
            Ok(l) => Some(Arc::new(l)),
            Err(OcseError::Degenerate(msg)) => {
                return Ok((0..n).map(|_| Err(OcseError::Degenerate(msg.clone()))).collect())
            }
            Err(e) => return Err(e),
        }
    };
    Ok((0..n)
        .map(|i| {
            let eval = Evaluator::Scalar(ScalarConditioner::with_factor(ctx, i, &rest, factor.clone())?);
            let stat = eval.statistic(j)?;
            Ok(assess(source, &eval, j, stat, cfg)?.significant.then_some(2.0 * stat))
        })
        .collect())
}
