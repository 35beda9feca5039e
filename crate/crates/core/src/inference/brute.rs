//! Exhaustive search for the minimal set with maximal causation entropy.

use crate::entropy::CausationEntropySource;
use crate::error::{OcseError, Result};

/// Smallest `K` with `C_{K→I} ≥ C_{V→I} − tol`, searching subsets by
/// increasing cardinality and lexicographic order within a cardinality.
///
/// Only meant for exact covariances and small `n`; the search is exponential.
/// Fails with [`OcseError::CardinalityExceeded`] when no subset of at most
/// `max_cardinality` nodes qualifies.
pub fn brute_force_parents<S: CausationEntropySource + ?Sized>(
    source: &S,
    targets: &[usize],
    max_cardinality: usize,
    tol: f64,
) -> Result<Vec<usize>> {
    if targets.is_empty() {
        return Err(OcseError::InvalidParameter("target set I must be nonempty".into()));
    }
    let n = source.node_count();
    let all: Vec<usize> = (0..n).collect();
    let c_max = source.causation_entropy(&all, targets, &[])?;
    if c_max <= tol {
        return Ok(Vec::new());
    }
    for k in 1..=max_cardinality.min(n) {
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            if source.causation_entropy(&subset, targets, &[])? >= c_max - tol {
                return Ok(subset);
            }
            if !next_combination(&mut subset, n) {
                break;
            }
        }
    }
    Err(OcseError::CardinalityExceeded(max_cardinality))
}

/// Advances `c` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let Some(pos) = (0..k).rev().find(|&p| c[p] < n - k + p) else {
        return false;
    };
    c[pos] += 1;
    for q in pos + 1..k {
        c[q] = c[q - 1] + 1;
    }
    true
}
