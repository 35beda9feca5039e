//! Closed-form causation entropy for directed chains, loops and unit trees.
//! These are independent of the Lyapunov pipeline and serve as ground truth for it.

use nalgebra::DMatrix;

use crate::covariance::{CovarianceSource, LaggedCovariance};
use crate::error::{OcseError, Result};
use crate::network::{loop_predecessor, TreeSpec};

/// `C_{j→i} = T_{j→i}` on the chain `0 -> 1 -> ... -> n-1` with noise levels `sigmas`:
/// `½ log(1 + Σ_{k≤j} σ_k² / σ_i²)` when `i = j + 1`, else 0.
pub fn chain_cse(j: usize, i: usize, sigmas: &[f64]) -> Result<f64> {
    let n = sigmas.len();
    if i >= n || j >= n {
        return Err(OcseError::IndexOutOfRange { index: i.max(j), n });
    }
    if i != j + 1 {
        return Ok(0.0);
    }
    let upstream: f64 = sigmas[..=j].iter().map(|s| s * s).sum();
    Ok(0.5 * (1.0 + upstream / (sigmas[i] * sigmas[i])).ln())
}

/// `C_{j→i} = T_{j→i}` on the uniform loop of `n` nodes and weight `w`:
/// `½ log(1 / (1 − w²))` when `j` is the predecessor of `i`, else 0.
pub fn loop_cse(j: usize, i: usize, w: f64, n: usize) -> Result<f64> {
    if !(w > 0.0 && w < 1.0) {
        return Err(OcseError::InvalidParameter(format!("loop weight {w} not in (0, 1)")));
    }
    if i >= n || j >= n {
        return Err(OcseError::IndexOutOfRange { index: i.max(j), n });
    }
    if loop_predecessor(i, n) != j {
        return Ok(0.0);
    }
    Ok(-0.5 * (1.0 - w * w).ln())
}

/// A tree together with its lowest-common-ancestor table.
#[derive(Debug, Clone)]
pub struct TreeQuery {
    spec: TreeSpec,
    lca: DMatrix<usize>,
}

impl TreeQuery {
    pub fn new(spec: TreeSpec) -> Self {
        let n = spec.n();
        let mut lca = DMatrix::<usize>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let k = lift_to_common(&spec, i, j);
                lca[(i, j)] = k;
                lca[(j, i)] = k;
            }
        }
        Self { spec, lca }
    }

    pub fn spec(&self) -> &TreeSpec {
        &self.spec
    }

    pub fn lca(&self, i: usize, j: usize) -> usize {
        self.lca[(i, j)]
    }
}

fn lift_to_common(spec: &TreeSpec, mut a: usize, mut b: usize) -> usize {
    while spec.depth(a) > spec.depth(b) {
        a = spec.parent(a).expect("deeper node has a parent");
    }
    while spec.depth(b) > spec.depth(a) {
        b = spec.parent(b).expect("deeper node has a parent");
    }
    while a != b {
        a = spec.parent(a).expect("non-root");
        b = spec.parent(b).expect("non-root");
    }
    a
}

/// `C_{j→i} = T_{j→i}` on a unit tree:
/// `½ log[(d_i+1)(d_j+1) / ((d_i+1)(d_j+1) − (d_{lca}+1)²)]` when `d_i = d_j + 1`, else 0.
pub fn tree_cse(tq: &TreeQuery, j: usize, i: usize) -> Result<f64> {
    let n = tq.spec.n();
    if i >= n || j >= n {
        return Err(OcseError::IndexOutOfRange { index: i.max(j), n });
    }
    let (di, dj) = (tq.spec.depth(i), tq.spec.depth(j));
    if di != dj + 1 {
        return Ok(0.0);
    }
    let prod = ((di + 1) * (dj + 1)) as f64;
    let shared = (tq.spec.depth(tq.lca(i, j)) + 1) as f64;
    Ok(0.5 * (prod / (prod - shared * shared)).ln())
}

/// Exact `Φ(0)` and `Φ(1)` of the unit tree with unit noise:
/// `Φ(0)_ij = [d_i = d_j] (d_lca + 1)`, `Φ(1)_ij = [i ≠ root][d_i = d_j + 1] (d_lca + 1)`.
pub fn tree_phi(tq: &TreeQuery) -> LaggedCovariance {
    let n = tq.spec.n();
    let shared = |i: usize, j: usize| (tq.spec.depth(tq.lca(i, j)) + 1) as f64;
    let phi0 = DMatrix::from_fn(n, n, |i, j| if tq.spec.depth(i) == tq.spec.depth(j) { shared(i, j) } else { 0.0 });
    let phi1 = DMatrix::from_fn(n, n, |i, j| {
        if i != tq.spec.root() && tq.spec.depth(i) == tq.spec.depth(j) + 1 {
            shared(i, j)
        } else {
            0.0
        }
    });
    LaggedCovariance::new(phi0, phi1, CovarianceSource::Exact).expect("finite closed form")
}
