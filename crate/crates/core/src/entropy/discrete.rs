//! Plug-in Shannon entropies over finite joint distributions.
//!
//! Used for the small Bernoulli systems where causation entropy behaves in
//! ways the Gaussian closed forms cannot show (non-monotone conditioning,
//! synergistic xor parents).

use std::collections::HashMap;

use crate::entropy::CausationEntropySource;
use crate::error::{OcseError, Result};

const PMF_TOLERANCE: f64 = 1e-12;

/// Joint pmf over labeled finite-alphabet variables, with the variables split
/// into next-state, source and condition groups.
#[derive(Debug, Clone)]
pub struct DiscreteJointDistribution {
    names: Vec<String>,
    outcomes: Vec<(Vec<u32>, f64)>,
    next: Vec<usize>,
    source: Vec<usize>,
    condition: Vec<usize>,
}

impl DiscreteJointDistribution {
    pub fn new(names: Vec<String>, outcomes: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        let width = names.len();
        let mut total = 0.0;
        for (values, p) in &outcomes {
            if values.len() != width {
                return Err(OcseError::InvalidDistribution(format!(
                    "outcome has {} values for {width} variables",
                    values.len()
                )));
            }
            if !(*p >= 0.0) || !p.is_finite() {
                return Err(OcseError::InvalidDistribution(format!("negative or non-finite probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(OcseError::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { names, outcomes, next: Vec::new(), source: Vec::new(), condition: Vec::new() })
    }

    /// Joint law of independent inputs pushed through deterministic outputs.
    ///
    /// `inputs` gives each input's name and pmf over `0..len`; every output is a
    /// function of the full input vector. Variables are ordered inputs first.
    pub fn from_mechanism(
        inputs: &[(&str, Vec<f64>)],
        outputs: &[(&str, &dyn Fn(&[u32]) -> u32)],
    ) -> Result<Self> {
        let mut names: Vec<String> = inputs.iter().map(|(n, _)| n.to_string()).collect();
        names.extend(outputs.iter().map(|(n, _)| n.to_string()));
        let mut outcomes = Vec::new();
        let mut idx = vec![0usize; inputs.len()];
        loop {
            let values: Vec<u32> = idx.iter().map(|&v| v as u32).collect();
            let p: f64 = inputs.iter().zip(&idx).map(|((_, pmf), &v)| pmf[v]).product();
            let mut row = values.clone();
            row.extend(outputs.iter().map(|(_, f)| f(&values)));
            outcomes.push((row, p));
            // Odometer increment over the input alphabets.
            let mut pos = 0;
            loop {
                if pos == inputs.len() {
                    return Self::new(names, outcomes);
                }
                idx[pos] += 1;
                if idx[pos] < inputs[pos].1.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| OcseError::InvalidParameter(format!("unknown variable `{name}`")))
    }

    /// Copy with the given role assignment (variable names).
    pub fn with_roles(&self, next: &[&str], source: &[&str], condition: &[&str]) -> Result<Self> {
        let lookup = |vs: &[&str]| vs.iter().map(|v| self.index_of(v)).collect::<Result<Vec<_>>>();
        self.with_role_indices(lookup(next)?, lookup(source)?, lookup(condition)?)
    }

    pub fn with_role_indices(&self, next: Vec<usize>, source: Vec<usize>, condition: Vec<usize>) -> Result<Self> {
        let width = self.names.len();
        let all: Vec<usize> = next.iter().chain(&source).chain(&condition).copied().collect();
        if let Some(&bad) = all.iter().find(|&&v| v >= width) {
            return Err(OcseError::IndexOutOfRange { index: bad, n: width });
        }
        if next.is_empty() || source.is_empty() {
            return Err(OcseError::InvalidParameter("next-state and source groups must be nonempty".into()));
        }
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(OcseError::InvalidParameter("role groups must be disjoint".into()));
        }
        Ok(Self { next, source, condition, ..self.clone() })
    }

    /// Shannon entropy (nats) of the marginal over `vars`.
    pub fn entropy_of(&self, vars: &[usize]) -> f64 {
        let mut marginal: HashMap<Vec<u32>, f64> = HashMap::new();
        for (values, p) in &self.outcomes {
            let key: Vec<u32> = vars.iter().map(|&v| values[v]).collect();
            *marginal.entry(key).or_insert(0.0) += p;
        }
        -marginal.values().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
    }

    fn conditional_entropy(&self, of: &[usize], given: &[usize]) -> f64 {
        let joint: Vec<usize> = of.iter().chain(given).copied().collect();
        self.entropy_of(&joint) - self.entropy_of(given)
    }
}

/// `H(next | condition) − H(next | condition, source)` for the distribution's roles.
pub fn discrete_causation_entropy(dist: &DiscreteJointDistribution) -> Result<f64> {
    if dist.next.is_empty() || dist.source.is_empty() {
        return Err(OcseError::InvalidParameter("assign roles with `with_roles` first".into()));
    }
    let with_source: Vec<usize> = dist.condition.iter().chain(&dist.source).copied().collect();
    Ok(dist.conditional_entropy(&dist.next, &dist.condition) - dist.conditional_entropy(&dist.next, &with_source))
}

/// A discrete lagged system: present states of `nodes` and next states of `targets`,
/// both given as variable indices into the joint distribution.
#[derive(Debug, Clone)]
pub struct DiscreteLaggedSystem {
    dist: DiscreteJointDistribution,
    nodes: Vec<usize>,
    targets: Vec<usize>,
}

impl DiscreteLaggedSystem {
    pub fn new(dist: DiscreteJointDistribution, nodes: &[&str], targets: &[&str]) -> Result<Self> {
        let nodes = nodes.iter().map(|v| dist.index_of(v)).collect::<Result<Vec<_>>>()?;
        let targets = targets.iter().map(|v| dist.index_of(v)).collect::<Result<Vec<_>>>()?;
        Ok(Self { dist, nodes, targets })
    }
}

impl CausationEntropySource for DiscreteLaggedSystem {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `sources` and `cond` index present-state nodes, `targets` indexes next-state targets.
    fn causation_entropy(&self, sources: &[usize], targets: &[usize], cond: &[usize]) -> Result<f64> {
        let map = |set: &[usize], table: &[usize]| {
            set.iter()
                .map(|&v| table.get(v).copied().ok_or(OcseError::IndexOutOfRange { index: v, n: table.len() }))
                .collect::<Result<Vec<_>>>()
        };
        let next = map(targets, &self.targets)?;
        let cond = map(cond, &self.nodes)?;
        let source: Vec<usize> = map(sources, &self.nodes)?.into_iter().filter(|v| !cond.contains(v)).collect();
        if source.is_empty() {
            return Ok(0.0);
        }
        discrete_causation_entropy(&self.dist.with_role_indices(next, source, cond)?)
    }
}

/// Sum of two fair bits: `X1' = X2 + X3`.
pub fn sum_of_bits_system() -> DiscreteJointDistribution {
    let sum = |v: &[u32]| v[0] + v[1];
    DiscreteJointDistribution::from_mechanism(&[("x2", vec![0.5, 0.5]), ("x3", vec![0.5, 0.5])], &[("x1_next", &sum)])
        .expect("valid pmf")
}

/// Common driver: the present of node 2 and the next state of node 1 both copy
/// the driver `x3`, which is held fixed across the step.
pub fn common_driver_system() -> DiscreteJointDistribution {
    let copy = |v: &[u32]| v[0];
    DiscreteJointDistribution::from_mechanism(&[("x3", vec![0.5, 0.5])], &[("x2", &copy), ("x1_next", &copy)])
        .expect("valid pmf")
}

/// Exclusive-or: `X' = Y ⊕ Z` with fair, independent `X`, `Y`, `Z`.
pub fn xor_system() -> DiscreteJointDistribution {
    let xor = |v: &[u32]| v[1] ^ v[2];
    DiscreteJointDistribution::from_mechanism(
        &[("x", vec![0.5, 0.5]), ("y", vec![0.5, 0.5]), ("z", vec![0.5, 0.5])],
        &[("x_next", &xor)],
    )
    .expect("valid pmf")
}
