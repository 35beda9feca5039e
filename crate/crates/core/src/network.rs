//! Weighted directed networks, benchmark topologies and error ratios.
//!
//! Orientation follows the adjacency convention used throughout the crate:
//! `weights[(i, j)]` is the weight of the link `j -> i`, so row `i` lists the
//! causal parents of node `i`.

use std::io::{BufRead, Write};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OcseError, Result};

/// Redraw budget for the signed ER generator when a draw is nilpotent.
pub const MAX_NILPOTENT_REDRAWS: usize = 100;

/// Dense weighted directed network.
#[derive(Debug, Clone)]
pub struct Network {
    weights: DMatrix<f64>,
    rho: OnceLock<f64>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
    }
}

impl Network {
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(OcseError::DimensionMismatch(format!(
                "adjacency must be square, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(OcseError::NonFinite);
        }
        Ok(Self { weights, rho: OnceLock::new() })
    }

    /// Network with no links.
    pub fn empty(n: usize) -> Self {
        Self { weights: DMatrix::zeros(n, n), rho: OnceLock::new() }
    }

    /// Builds an unweighted network (unit weights) from per-node parent lists.
    pub fn from_parent_sets(parents: &[Vec<usize>]) -> Result<Self> {
        let n = parents.len();
        let mut weights = DMatrix::zeros(n, n);
        for (i, ps) in parents.iter().enumerate() {
            for &j in ps {
                if j >= n {
                    return Err(OcseError::IndexOutOfRange { index: j, n });
                }
                weights[(i, j)] = 1.0;
            }
        }
        Self::from_weights(weights)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Causal parents of `i`: every `j` with a nonzero `weights[(i, j)]`.
    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.weights[(i, j)] != 0.0).collect()
    }

    pub fn has_link(&self, source: usize, target: usize) -> bool {
        self.weights[(target, source)] != 0.0
    }

    pub fn link_count(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    /// Links as `(target, source, weight)` in row-major order.
    pub fn links(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Spectral radius, computed once and cached.
    pub fn spectral_radius(&self) -> f64 {
        *self.rho.get_or_init(|| spectral_radius(&self.weights))
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(OcseError::DimensionMismatch("permutation length".into()));
        }
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                w[(perm[i], perm[j])] = self.weights[(i, j)];
            }
        }
        Self::from_weights(w)
    }

    fn with_rho(weights: DMatrix<f64>, rho: f64) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(rho);
        Self { weights, rho: cell }
    }
}

/// Spectral radius of a square matrix.
///
/// Matrices whose support graph is acyclic are nilpotent and return exactly 0;
/// otherwise the eigenvalues come from a real Schur decomposition.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if support_is_acyclic(m) {
        return 0.0;
    }
    let n = m.nrows();
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10));
    match schur {
        Some(s) => s.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => {
            // Schur did not converge; fall back on a long Gelfand sequence.
            gelfand_estimate(m, 1 << 12)
        }
    }
}

/// `||M^k||_2^(1/k)` for `k` rounded up to a power of two (computed by squaring).
pub fn gelfand_estimate(m: &DMatrix<f64>, k: usize) -> f64 {
    let mut power = m.clone();
    let mut exp = 1usize;
    // Track a running scale so repeated squaring neither overflows nor underflows.
    let mut log_scale = 0.0_f64;
    while exp < k {
        power = &power * &power;
        log_scale *= 2.0;
        let norm = crate::linalg::max_abs(&power);
        if norm == 0.0 {
            return 0.0;
        }
        power /= norm;
        log_scale += norm.ln();
        exp *= 2;
    }
    let sv = power.singular_values().max();
    if sv == 0.0 {
        return 0.0;
    }
    ((sv.ln() + log_scale) / exp as f64).exp()
}

/// Exact nilpotency test for an integer-valued matrix: `M^k ≡ 0` modulo two
/// large primes for some power `k ≥ n`.
fn is_nilpotent_integer(m: &DMatrix<f64>) -> bool {
    const PRIMES: [u64; 2] = [2_147_483_647, 1_000_000_007];
    let n = m.nrows();
    PRIMES.iter().all(|&p| {
        let reduce = |v: f64| (v as i64).rem_euclid(p as i64) as u64;
        let mut power: Vec<u64> = (0..n * n).map(|k| reduce(m[(k / n, k % n)])).collect();
        let mut exp = 1;
        while exp < n {
            let mut next = vec![0u64; n * n];
            for i in 0..n {
                for k in 0..n {
                    let a = power[i * n + k];
                    if a == 0 {
                        continue;
                    }
                    for j in 0..n {
                        next[i * n + j] = (next[i * n + j] + a * power[k * n + j]) % p;
                    }
                }
            }
            power = next;
            exp *= 2;
        }
        power.iter().all(|&v| v == 0)
    })
}

fn support_is_acyclic(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let mut indegree = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] != 0.0 {
                indegree[i] += 1;
            }
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut seen = 0;
    while let Some(j) = stack.pop() {
        seen += 1;
        for i in 0..n {
            if m[(i, j)] != 0.0 {
                indegree[i] -= 1;
                if indegree[i] == 0 {
                    stack.push(i);
                }
            }
        }
    }
    seen == n
}

/// Signed Erdős–Rényi network: every ordered pair (self-loops included) carries
/// a link with probability `p`, weights are `±w` with equal probability, and
/// `w` is tuned so the spectral radius equals `target_rho`.
pub fn generate_er_signed(n: usize, p: f64, target_rho: f64, seed: u64) -> Result<Network> {
    if n == 0 {
        return Err(OcseError::InvalidParameter("n must be positive".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(OcseError::InvalidParameter(format!("link probability {p} not in (0, 1]")));
    }
    if !(target_rho > 0.0 && target_rho < 1.0) {
        return Err(OcseError::InvalidParameter(format!(
            "target spectral radius {target_rho} not in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_NILPOTENT_REDRAWS {
        let mut w = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if rng.gen::<f64>() < p {
                    w[(i, j)] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                }
            }
        }
        let rho = spectral_radius(&w);
        // A non-nilpotent integer matrix has an eigenvalue of modulus at least 1,
        // so a smaller computed radius is either rounding noise on a nilpotent
        // matrix or needs the exact check.
        if rho < 1e-9 || (rho < 1.0 && is_nilpotent_integer(&w)) {
            continue;
        }
        w *= target_rho / rho;
        let tuned = spectral_radius(&w);
        if (tuned - target_rho).abs() > 1e-8 {
            return Err(OcseError::InvalidParameter(format!(
                "spectral radius tuning missed target: {tuned} vs {target_rho}"
            )));
        }
        return Ok(Network::with_rho(w, tuned));
    }
    Err(OcseError::Nilpotent(MAX_NILPOTENT_REDRAWS))
}

/// Directed chain `0 -> 1 -> ... -> n-1` with unit weights.
pub fn chain_network(n: usize) -> Result<Network> {
    if n < 2 {
        return Err(OcseError::InvalidParameter("chain needs at least 2 nodes".into()));
    }
    let mut w = DMatrix::zeros(n, n);
    for j in 0..n - 1 {
        w[(j + 1, j)] = 1.0;
    }
    Ok(Network::with_rho(w, 0.0))
}

/// Directed loop `0 -> 1 -> ... -> n-1 -> 0` with uniform weight `w`.
pub fn loop_network(n: usize, w: f64) -> Result<Network> {
    if n < 2 {
        return Err(OcseError::InvalidParameter("loop needs at least 2 nodes".into()));
    }
    if !(w > 0.0 && w < 1.0) {
        return Err(OcseError::InvalidParameter(format!("loop weight {w} not in (0, 1)")));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, loop_predecessor(i, n))] = w;
    }
    Ok(Network::with_rho(m, w))
}

/// Predecessor of `i` on the directed loop of `n` nodes.
pub fn loop_predecessor(i: usize, n: usize) -> usize {
    (i + n - 1) % n
}

/// Rooted directed tree: each non-root node has exactly one parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSpec {
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    root: usize,
}

impl TreeSpec {
    /// Validates a parent map (`None` marks the root) and computes depths.
    pub fn from_parents(parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(OcseError::MalformedTree("empty tree".into()));
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(OcseError::MalformedTree(format!("expected one root, found {}", roots.len())));
        }
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(OcseError::IndexOutOfRange { index: p, n });
                }
                if p == i {
                    return Err(OcseError::MalformedTree(format!("node {i} is its own parent")));
                }
            }
        }
        let mut depth = vec![usize::MAX; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = start;
            while depth[cur] == usize::MAX {
                if path.len() > n {
                    return Err(OcseError::MalformedTree(format!("cycle through node {start}")));
                }
                path.push(cur);
                match parent[cur] {
                    Some(p) => cur = p,
                    None => {
                        depth[cur] = 0;
                        path.pop();
                        break;
                    }
                }
            }
            while let Some(node) = path.pop() {
                let p = parent[node].expect("non-root on path");
                depth[node] = depth[p] + 1;
            }
        }
        Ok(Self { parent, depth, root: roots[0] })
    }

    /// Root 0 with every other node attached to it.
    pub fn star(n: usize) -> Result<Self> {
        Self::from_parents((0..n).map(|i| if i == 0 { None } else { Some(0) }).collect())
    }

    /// Path `0 -> 1 -> ... -> n-1`.
    pub fn path(n: usize) -> Result<Self> {
        Self::from_parents((0..n).map(|i| i.checked_sub(1)).collect())
    }

    /// Complete `branching`-ary tree in breadth-first numbering.
    pub fn complete(n: usize, branching: usize) -> Result<Self> {
        if branching == 0 {
            return Err(OcseError::InvalidParameter("branching must be positive".into()));
        }
        Self::from_parents((0..n).map(|i| if i == 0 { None } else { Some((i - 1) / branching) }).collect())
    }

    /// Random recursive tree: node `i > 0` picks its parent uniformly among `0..i`.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_parents((0..n).map(|i| if i == 0 { None } else { Some(rng.gen_range(0..i)) }).collect())
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }
}

/// Unit-weight network of a tree: `weights[(i, parent(i))] = 1`.
pub fn tree_network(spec: &TreeSpec) -> Network {
    let n = spec.n();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        if let Some(p) = spec.parent(i) {
            w[(i, p)] = 1.0;
        }
    }
    Network::with_rho(w, 0.0)
}

/// False negative (`ε−`) and false positive (`ε+`) ratios. A ratio is `None`
/// when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRatios {
    pub false_negative: Option<f64>,
    pub false_positive: Option<f64>,
}

/// Compares inferred links with the truth over all `n²` ordered pairs.
pub fn error_ratios(truth: &Network, inferred: &Network) -> Result<ErrorRatios> {
    let n = truth.n();
    if inferred.n() != n {
        return Err(OcseError::DimensionMismatch(format!(
            "truth has {n} nodes, inferred has {}",
            inferred.n()
        )));
    }
    let (mut links, mut missed, mut absent, mut spurious) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            let t = truth.weights[(i, j)] != 0.0;
            let h = inferred.weights[(i, j)] != 0.0;
            match (t, h) {
                (true, false) => {
                    links += 1;
                    missed += 1;
                }
                (true, true) => links += 1,
                (false, true) => {
                    absent += 1;
                    spurious += 1;
                }
                (false, false) => absent += 1,
            }
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(ErrorRatios { false_negative: ratio(missed, links), false_positive: ratio(spurious, absent) })
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeListHeader {
    n: usize,
    rho: f64,
}

/// Writes the edge-list format: a JSON header line `{"n":..,"rho":..}` followed
/// by one `i,j,weight` line per link (`i` the target row, `j` the source column).
pub fn write_edge_list<W: Write>(net: &Network, mut out: W) -> Result<()> {
    let header = EdgeListHeader { n: net.n(), rho: net.spectral_radius() };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for (i, j, w) in net.links() {
        writeln!(out, "{i},{j},{w}")?;
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<Network> {
    let mut lines = input.lines().enumerate();
    let header: EdgeListHeader = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(line.trim())?;
            }
            None => return Err(OcseError::Parse { line: 1, msg: "missing header".into() }),
        }
    };
    let n = header.n;
    let mut w = DMatrix::zeros(n, n);
    for (idx, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: &str| OcseError::Parse { line: idx + 1, msg: msg.to_string() };
        let mut fields = line.split(',').map(str::trim);
        let i: usize = fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("bad target index"))?;
        let j: usize = fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("bad source index"))?;
        let v: f64 = fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("bad weight"))?;
        if fields.next().is_some() {
            return Err(parse_err("expected exactly three fields"));
        }
        if i >= n || j >= n {
            return Err(OcseError::IndexOutOfRange { index: i.max(j), n });
        }
        w[(i, j)] = v;
    }
    Network::from_weights(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn er_complete_graph_at_p_one() {
        let net = generate_er_signed(5, 1.0, 0.5, 3).unwrap();
        assert_eq!(net.link_count(), 25);
        let mags: Vec<f64> = net.weights().iter().map(|w| w.abs()).collect();
        for m in &mags {
            assert_abs_diff_eq!(*m, mags[0], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(net.spectral_radius(), 0.5, epsilon = 1e-8);
    }

    #[test]
    fn er_is_deterministic_under_seed() {
        let a = generate_er_signed(50, 0.1, 0.8, 11).unwrap();
        let b = generate_er_signed(50, 0.1, 0.8, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_er_signed(50, 0.1, 0.8, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn er_rejects_bad_parameters() {
        assert!(generate_er_signed(5, 0.0, 0.5, 1).is_err());
        assert!(generate_er_signed(5, 1.5, 0.5, 1).is_err());
        assert!(generate_er_signed(5, 0.5, 1.0, 1).is_err());
        assert!(generate_er_signed(5, 0.5, 0.0, 1).is_err());
    }

    #[test]
    fn er_nilpotent_budget_exhausted() {
        // One node with a tiny link probability is almost surely linkless on every redraw.
        let err = generate_er_signed(1, 1e-12, 0.5, 0).unwrap_err();
        assert!(matches!(err, OcseError::Nilpotent(MAX_NILPOTENT_REDRAWS)));
    }

    #[test]
    fn nilpotent_matrices_with_cycles_detected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, -1.0]);
        assert!(is_nilpotent_integer(&m));
        assert!(!support_is_acyclic(&m));
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(!is_nilpotent_integer(&swap));
        for seed in 0..500 {
            let net = generate_er_signed(2 + seed as usize % 5, 0.3, 0.8, seed).unwrap();
            assert!(net.weights().amax() < 10.0, "seed {seed}");
        }
    }

    #[test]
    fn chain_and_loop_shapes() {
        let c = chain_network(3).unwrap();
        assert_eq!(c.links(), vec![(1, 0, 1.0), (2, 1, 1.0)]);
        assert_eq!(chain_network(2).unwrap().link_count(), 1);
        let big = chain_network(1000).unwrap();
        assert_eq!(big.link_count(), 999);
        assert_eq!(spectral_radius(big.weights()), 0.0);
        assert!(chain_network(1).is_err());

        let l = loop_network(4, 0.5).unwrap();
        assert_eq!(l.link_count(), 4);
        assert_abs_diff_eq!(spectral_radius(l.weights()), 0.5, epsilon = 1e-12);
        assert_eq!(loop_network(2, 0.9).unwrap().parents(0), vec![1]);
        assert!(loop_network(4, 1.0).is_err());
        assert!(loop_network(4, 0.0).is_err());
    }

    #[test]
    fn loop_spectral_radius_large() {
        let l = loop_network(100, 0.99).unwrap();
        assert_abs_diff_eq!(spectral_radius(l.weights()), 0.99, epsilon = 1e-10);
    }

    #[test]
    fn spectral_radius_simple_cases() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, -0.7]));
        assert_abs_diff_eq!(spectral_radius(&d), 0.7, epsilon = 1e-14);
        assert_eq!(spectral_radius(&DMatrix::zeros(4, 4)), 0.0);
        assert_eq!(spectral_radius(chain_network(10).unwrap().weights()), 0.0);
    }

    #[test]
    fn tree_networks() {
        let star = TreeSpec::star(5).unwrap();
        let net = tree_network(&star);
        assert_eq!(net.link_count(), 4);
        assert!(net.links().iter().all(|&(_, j, _)| j == 0));

        // Binary tree of depth 3 has 15 nodes and 14 links.
        let bin = TreeSpec::complete(15, 2).unwrap();
        assert_eq!(bin.depth(14), 3);
        assert_eq!(tree_network(&bin).link_count(), 14);

        let path = tree_network(&TreeSpec::path(7).unwrap());
        assert_eq!(path, chain_network(7).unwrap());
        assert_eq!(path.spectral_radius(), 0.0);
    }

    #[test]
    fn malformed_trees_rejected() {
        assert!(TreeSpec::from_parents(vec![None, None]).is_err());
        assert!(TreeSpec::from_parents(vec![Some(1), Some(0)]).is_err());
        assert!(TreeSpec::from_parents(vec![None, Some(2), Some(1)]).is_err());
        assert!(TreeSpec::from_parents(vec![None, Some(5)]).is_err());
    }

    #[test]
    fn error_ratio_examples() {
        let truth = chain_network(3).unwrap();
        let perfect = error_ratios(&truth, &truth).unwrap();
        assert_eq!(perfect.false_negative, Some(0.0));
        assert_eq!(perfect.false_positive, Some(0.0));

        let none = error_ratios(&truth, &Network::empty(3)).unwrap();
        assert_eq!(none.false_negative, Some(1.0));
        assert_eq!(none.false_positive, Some(0.0));

        // Inferred 0->1 and 0->2 against the chain 0->1->2.
        let inferred = Network::from_parent_sets(&[vec![], vec![0], vec![0]]).unwrap();
        let r = error_ratios(&truth, &inferred).unwrap();
        assert_eq!(r.false_negative, Some(0.5));
        assert_eq!(r.false_positive, Some(1.0 / 7.0));

        let undefined = error_ratios(&Network::empty(2), &Network::empty(2)).unwrap();
        assert_eq!(undefined.false_negative, None);
        assert!(error_ratios(&truth, &Network::empty(4)).is_err());
    }

    #[test]
    fn edge_list_round_trip_is_bit_exact() {
        let net = generate_er_signed(12, 0.3, 0.8, 5).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"n\":12,\"rho\":"));
        let back = read_edge_list(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn edge_list_parse_errors() {
        let bad = "{\"n\":2,\"rho\":0.0}\n0,5,1.0\n";
        assert!(read_edge_list(std::io::Cursor::new(bad)).is_err());
        let bad = "{\"n\":2,\"rho\":0.0}\n0,x,1.0\n";
        assert!(matches!(read_edge_list(std::io::Cursor::new(bad)), Err(OcseError::Parse { line: 2, .. })));
    }
}
