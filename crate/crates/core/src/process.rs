//! Linear Gaussian network process `X_t = A X_{t-1} + ξ_t` and delay embedding.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{OcseError, Result};
use crate::network::{spectral_radius, Network};

/// Number of simulated steps per retained sample; only the final `T` are kept.
pub const TRANSIENT_FACTOR: usize = 10;

#[derive(Debug, Clone)]
pub struct GaussianProcessSpec {
    pub network: Network,
    /// Per-node noise standard deviations `σ_i` (noise covariance `diag(σ_i²)`).
    pub noise_std: Vec<f64>,
    pub seed: u64,
}

impl GaussianProcessSpec {
    /// Unit noise on every node.
    pub fn unit_noise(network: Network, seed: u64) -> Self {
        let n = network.n();
        Self { network, noise_std: vec![1.0; n], seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_std.len() != self.network.n() {
            return Err(OcseError::DimensionMismatch(format!(
                "{} noise levels for {} nodes",
                self.noise_std.len(),
                self.network.n()
            )));
        }
        if self.noise_std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(OcseError::InvalidParameter("noise standard deviations must be positive".into()));
        }
        let rho = self.network.spectral_radius();
        if rho >= 1.0 {
            return Err(OcseError::Unstable(rho));
        }
        Ok(())
    }

    /// Noise covariance `S = diag(σ_i²)`.
    pub fn noise_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.noise_std.len(),
            self.noise_std.iter().map(|s| s * s),
        ))
    }
}

/// `T × n` matrix of samples; row `t` is the state `X_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: DMatrix<f64>,
    labels: Vec<String>,
}

impl TimeSeries {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        let labels = (0..samples.ncols()).map(|i| format!("x{i}")).collect();
        Self::with_labels(samples, labels)
    }

    pub fn with_labels(samples: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != samples.ncols() {
            return Err(OcseError::DimensionMismatch(format!(
                "{} labels for {} columns",
                labels.len(),
                samples.ncols()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(OcseError::NonFinite);
        }
        Ok(Self { samples, labels })
    }

    pub fn n(&self) -> usize {
        self.samples.ncols()
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Contiguous samples of one node.
    pub fn column(&self, node: usize) -> &[f64] {
        let t = self.len();
        &self.samples.as_slice()[node * t..(node + 1) * t]
    }

    /// CSV with header `t,<label0>,<label1>,...`; values use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t")?;
        for l in &self.labels {
            write!(out, ",{l}")?;
        }
        writeln!(out)?;
        for t in 0..self.len() {
            write!(out, "{t}")?;
            for i in 0..self.n() {
                write!(out, ",{}", self.samples[(t, i)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(OcseError::Parse { line: 1, msg: "empty file".into() })??;
        let mut cols = header.split(',').map(|s| s.trim().to_string());
        if cols.next().as_deref() != Some("t") {
            return Err(OcseError::Parse { line: 1, msg: "header must start with `t`".into() });
        }
        let labels: Vec<String> = cols.collect();
        let n = labels.len();
        let mut rows: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n + 1 {
                return Err(OcseError::Parse {
                    line: idx + 2,
                    msg: format!("expected {} fields, found {}", n + 1, fields.len()),
                });
            }
            for f in &fields[1..] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| OcseError::Parse { line: idx + 2, msg: format!("bad number `{f}`") })?;
                rows.push(v);
            }
            count += 1;
        }
        Self::with_labels(DMatrix::from_row_slice(count, n, &rows), labels)
    }
}

/// Simulates the process for `10 T` steps from `X_0 = ξ_0` and keeps the final `T` states.
pub fn simulate_gaussian(spec: &GaussianProcessSpec, t_len: usize) -> Result<TimeSeries> {
    spec.validate()?;
    simulate_lagged(&[spec.network.weights().clone()], &spec.noise_std, t_len, spec.seed)
}

/// Vector autoregression of order `lags.len()`: `X_t = Σ_s lags[s] X_{t-1-s} + ξ_t`,
/// with the same transient protocol as [`simulate_gaussian`].
pub fn simulate_var(lags: &[DMatrix<f64>], noise_std: &[f64], t_len: usize, seed: u64) -> Result<TimeSeries> {
    let companion = companion_matrix(lags)?;
    let rho = spectral_radius(&companion);
    if rho >= 1.0 {
        return Err(OcseError::Unstable(rho));
    }
    if noise_std.len() != lags[0].nrows() || noise_std.iter().any(|s| !(*s > 0.0)) {
        return Err(OcseError::InvalidParameter("noise levels must be positive, one per node".into()));
    }
    simulate_lagged(lags, noise_std, t_len, seed)
}

fn simulate_lagged(lags: &[DMatrix<f64>], noise_std: &[f64], t_len: usize, seed: u64) -> Result<TimeSeries> {
    if t_len < 1 {
        return Err(OcseError::InvalidParameter("sample count must be at least 1".into()));
    }
    let n = noise_std.len();
    let order = lags.len();
    // Sparse rows: for each target, its (source, weight) pairs per lag.
    let sparse: Vec<Vec<Vec<(usize, f64)>>> = lags
        .iter()
        .map(|a| {
            (0..n)
                .map(|i| (0..n).filter(|&j| a[(i, j)] != 0.0).map(|j| (j, a[(i, j)])).collect())
                .collect()
        })
        .collect();
    let total = TRANSIENT_FACTOR * t_len;
    let keep_from = total - t_len;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Ring buffer of the last `order` states; history[0] is the most recent.
    let mut history: Vec<Vec<f64>> = vec![vec![0.0; n]; order];
    let mut samples = DMatrix::<f64>::zeros(t_len, n);
    let mut next = vec![0.0; n];
    for step in 0..total {
        for i in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let mut v = noise_std[i] * z;
            if step > 0 {
                for (lag, rows) in sparse.iter().enumerate() {
                    for &(j, w) in &rows[i] {
                        v += w * history[lag][j];
                    }
                }
            }
            next[i] = v;
        }
        history.rotate_right(1);
        history[0].copy_from_slice(&next);
        if step >= keep_from {
            let row = step - keep_from;
            for i in 0..n {
                samples[(row, i)] = next[i];
            }
        }
    }
    TimeSeries::new(samples)
}

/// First-order companion matrix of a VAR(τ) with coefficient blocks `lags`.
pub fn companion_matrix(lags: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let tau = lags.len();
    if tau == 0 {
        return Err(OcseError::InvalidParameter("at least one lag matrix required".into()));
    }
    let n = lags[0].nrows();
    if lags.iter().any(|a| a.nrows() != n || a.ncols() != n) {
        return Err(OcseError::DimensionMismatch("lag matrices must all be n x n".into()));
    }
    let mut c = DMatrix::zeros(n * tau, n * tau);
    for (s, a) in lags.iter().enumerate() {
        c.view_mut((0, s * n), (n, n)).copy_from(a);
    }
    for s in 1..tau {
        for i in 0..n {
            c[(s * n + i, (s - 1) * n + i)] = 1.0;
        }
    }
    Ok(c)
}

/// Delay embedding of an order-`tau` series as a first-order one over `n·tau` nodes.
///
/// Embedded node `s·n + i` (`s = 0..tau`) at output time `t` holds raw node `i`
/// at raw time `t + tau - 1 - s`.
pub fn embed_markov_order(raw: &TimeSeries, tau: usize) -> Result<TimeSeries> {
    if tau == 0 {
        return Err(OcseError::InvalidParameter("embedding order must be at least 1".into()));
    }
    if tau >= raw.len() {
        return Err(OcseError::TooFewSamples(format!(
            "embedding order {tau} needs more than {} samples",
            raw.len()
        )));
    }
    let n = raw.n();
    let out_len = raw.len() - tau + 1;
    let mut samples = DMatrix::zeros(out_len, n * tau);
    let mut labels = Vec::with_capacity(n * tau);
    for s in 0..tau {
        for i in 0..n {
            labels.push(if s == 0 { raw.labels()[i].clone() } else { format!("{}_lag{s}", raw.labels()[i]) });
            for t in 0..out_len {
                samples[(t, s * n + i)] = raw.samples()[(t + tau - 1 - s, i)];
            }
        }
    }
    TimeSeries::with_labels(samples, labels)
}
