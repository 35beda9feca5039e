//! The two phases of oCSE for a target set `I`.

use crate::error::{OcseError, Result};
use crate::inference::significance::{assess, Evaluator};
use crate::inference::{DataSource, DiscoveryTrace, Phase, SignificanceConfig, TraceStep};

fn check_targets(source: &DataSource, targets: &[usize]) -> Result<()> {
    if targets.is_empty() {
        return Err(OcseError::InvalidParameter("target set I must be nonempty".into()));
    }
    let n = source.n();
    match targets.iter().find(|&&v| v >= n) {
        Some(&index) => Err(OcseError::IndexOutOfRange { index, n }),
        None => Ok(()),
    }
}

/// Greedy forward phase: repeatedly adds the node with the largest
/// `C_{j→I|K}`, as long as that maximum is significant.
///
/// Ties go to the lowest index. Only the maximizing candidate is tested each
/// round, and the first failing maximum ends the phase. On empirical data the
/// phase also ends when `K` has grown too large for the sample count.
pub fn aggregative_discovery(
    source: &DataSource,
    targets: &[usize],
    cfg: &SignificanceConfig,
) -> Result<DiscoveryTrace> {
    check_targets(source, targets)?;
    cfg.validate()?;
    let ctx = source.context();
    let n = ctx.n();
    let mut cond: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    while cond.len() < n {
        let eval = match Evaluator::new(ctx, targets, &cond) {
            Ok(e) => e,
            Err(OcseError::Degenerate(_)) => break,
            Err(e) => return Err(e),
        };
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|j| !cond.contains(j)) {
            let stat = eval.statistic(j)?;
            if best.map_or(true, |(_, b)| stat > b) {
                best = Some((j, stat));
            }
        }
        let Some((p, stat)) = best else { break };
        let outcome = assess(source, &eval, p, stat, cfg)?;
        steps.push(TraceStep {
            phase: Phase::Discovery,
            candidate: p,
            statistic: stat,
            significant: outcome.significant,
            ecdf: outcome.ecdf,
        });
        if !outcome.significant {
            break;
        }
        cond.push(p);
    }
    Ok(DiscoveryTrace { target: targets.to_vec(), steps, discovered: cond.clone(), pruned: cond })
}

/// Backward phase: walks `cond` in the given order and drops every node whose
/// `C_{p→I|K−{p}}` is not significant given the nodes still kept.
///
/// Pass the insertion order of [`aggregative_discovery`]; for a set from
/// elsewhere, ascending order.
pub fn progressive_removal(
    source: &DataSource,
    targets: &[usize],
    cond: &[usize],
    cfg: &SignificanceConfig,
) -> Result<DiscoveryTrace> {
    check_targets(source, targets)?;
    cfg.validate()?;
    let ctx = source.context();
    let n = ctx.n();
    if let Some(&index) = cond.iter().find(|&&v| v >= n) {
        return Err(OcseError::IndexOutOfRange { index, n });
    }
    let mut kept: Vec<usize> = Vec::with_capacity(cond.len());
    for &p in cond {
        if !kept.contains(&p) {
            kept.push(p);
        }
    }
    let discovered = kept.clone();
    let mut steps = Vec::new();
    for &p in &discovered {
        let rest: Vec<usize> = kept.iter().copied().filter(|&k| k != p).collect();
        let eval = Evaluator::new(ctx, targets, &rest)?;
        let stat = eval.statistic(p)?;
        let outcome = assess(source, &eval, p, stat, cfg)?;
        steps.push(TraceStep {
            phase: Phase::Removal,
            candidate: p,
            statistic: stat,
            significant: outcome.significant,
            ecdf: outcome.ecdf,
        });
        if !outcome.significant {
            kept.retain(|&k| k != p);
        }
    }
    Ok(DiscoveryTrace { target: targets.to_vec(), steps, discovered, pruned: kept })
}

/// Causal parents of node `i`: aggregative discovery, then progressive removal
/// of its output. The trace holds both phases.
pub fn infer_parents_ocse(source: &DataSource, i: usize, cfg: &SignificanceConfig) -> Result<DiscoveryTrace> {
    let forward = aggregative_discovery(source, &[i], cfg)?;
    let backward = progressive_removal(source, &[i], &forward.discovered, cfg)?;
    let mut steps = forward.steps;
    steps.extend(backward.steps);
    Ok(DiscoveryTrace { target: vec![i], steps, discovered: forward.discovered, pruned: backward.pruned })
}
