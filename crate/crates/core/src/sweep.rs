//! Batch error-ratio experiments over a parameter grid.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OcseError, Result};
use crate::inference::significance::splitmix64;
use crate::inference::{infer_network, DataSource, Method, SignificanceConfig};
use crate::network::{error_ratios, generate_er_signed};
use crate::process::{simulate_gaussian, GaussianProcessSpec};

/// Grid of experiment parameters. Every combination is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n: Vec<usize>,
    /// Expected number of links per node; the link probability is `np / n`.
    pub np: Vec<f64>,
    pub rho: Vec<f64>,
    pub t: Vec<usize>,
    pub methods: Vec<Method>,
    pub r: Vec<usize>,
    pub theta: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            n: vec![50],
            np: vec![5.0],
            rho: vec![0.8],
            t: vec![200],
            methods: vec![Method::Ocse],
            r: vec![100],
            theta: vec![0.99],
            realizations: 10,
            master_seed: 0,
            jobs: None,
        }
    }
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    pub np: f64,
    pub rho: f64,
    pub t: usize,
    pub method: Method,
    pub r: usize,
    pub theta: f64,
}

impl SweepCell {
    fn slice_key(&self) -> SliceKey {
        SliceKey {
            n: self.n,
            np: self.np.to_bits(),
            rho: self.rho.to_bits(),
            method: self.method.name(),
            r: self.r,
            theta: self.theta.to_bits(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct SliceKey {
    n: usize,
    np: u64,
    rho: u64,
    method: &'static str,
    r: usize,
    theta: u64,
}

/// Aggregated error ratios of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: SweepCell,
    /// Means over the realizations where the ratio is defined.
    pub eps_minus: Option<f64>,
    pub eps_plus: Option<f64>,
    pub stderr_minus: Option<f64>,
    pub stderr_plus: Option<f64>,
    /// Total inference wall time over all realizations.
    pub runtime_secs: f64,
    pub inferences: usize,
    /// Realizations in which some node's tests were degenerate.
    pub degenerate_realizations: usize,
    /// Smallest swept `T` of this cell's slice with mean ε− below `1 − θ`.
    pub t_star: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("n", self.n.is_empty()),
            ("np", self.np.is_empty()),
            ("rho", self.rho.is_empty()),
            ("T", self.t.is_empty()),
            ("method", self.methods.is_empty()),
            ("r", self.r.is_empty()),
            ("theta", self.theta.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(OcseError::InvalidParameter(format!("sweep axis '{name}' is empty")));
        }
        if self.realizations < 1 {
            return Err(OcseError::InvalidParameter("realizations must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(OcseError::InvalidParameter("jobs must be at least 1".into()));
        }
        for &n in &self.n {
            for &np in &self.np {
                if n == 0 || !(np >= 0.0) || np > n as f64 {
                    return Err(OcseError::InvalidParameter(format!("np={np} infeasible for n={n}")));
                }
            }
        }
        for &r in &self.r {
            for &theta in &self.theta {
                SignificanceConfig::new(r, theta, 0)?;
            }
        }
        Ok(())
    }

    /// Cells in grid order: n, np, rho, T, method, r, theta (last varies fastest).
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &np in &self.np {
                for &rho in &self.rho {
                    for &t in &self.t {
                        for &method in &self.methods {
                            for &r in &self.r {
                                for &theta in &self.theta {
                                    out.push(SweepCell { n, np, rho, t, method, r, theta });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Number of inferences a run performs.
    pub fn total_work(&self) -> usize {
        self.cells().len() * self.realizations
    }
}

fn mix(values: &[u64]) -> u64 {
    values.iter().fold(0x6A09_E667_F3BC_C908, |h, &v| splitmix64(h ^ v))
}

struct Realization {
    eps_minus: Option<f64>,
    eps_plus: Option<f64>,
    secs: f64,
    degenerate: bool,
}

/// Network seed: shared by every `T`, method and test setting of the same
/// `(n, np, rho)` realization.
fn network_seed(master: u64, cell: &SweepCell, k: usize) -> u64 {
    mix(&[master, 1, cell.n as u64, cell.np.to_bits(), cell.rho.to_bits(), k as u64])
}

fn run_one(master: u64, cell: &SweepCell, k: usize) -> Result<Realization> {
    let net_seed = network_seed(master, cell, k);
    let net = generate_er_signed(cell.n, cell.np / cell.n as f64, cell.rho, net_seed)?;
    let sim_seed = mix(&[net_seed, 2, cell.t as u64]);
    let ts = simulate_gaussian(&GaussianProcessSpec::unit_noise(net.clone(), sim_seed), cell.t)?;
    let cfg = SignificanceConfig::new(cell.r, cell.theta, mix(&[sim_seed, 3]))?;
    let start = Instant::now();
    let source = DataSource::from_series(&ts)?;
    let inferred = infer_network(&source, cell.method, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let ratios = error_ratios(&net, &inferred.to_network()?)?;
    Ok(Realization {
        eps_minus: ratios.false_negative,
        eps_plus: ratios.false_positive,
        secs,
        degenerate: inferred.is_degenerate(),
    })
}

fn mean_and_stderr(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (Some(mean), Some((var / m).sqrt()))
}

/// Runs every cell and realization. Results come back in grid order and do
/// not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with_progress(spec, &|_, _| {})
}

/// Like [`run_sweep`], calling `progress(done, total)` after each inference.
pub fn run_sweep_with_progress(spec: &SweepSpec, progress: &(dyn Fn(usize, usize) + Sync)) -> Result<SweepResult> {
    spec.validate()?;
    let cells = spec.cells();
    let total = cells.len() * spec.realizations;
    let done = AtomicUsize::new(0);
    let work = || -> Result<Vec<Realization>> {
        (0..total)
            .into_par_iter()
            .map(|u| {
                let res = run_one(spec.master_seed, &cells[u / spec.realizations], u % spec.realizations);
                progress(done.fetch_add(1, Ordering::SeqCst) + 1, total);
                res
            })
            .collect()
    };
    let runs = match spec.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| OcseError::InvalidParameter(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let mut results: Vec<CellResult> = cells
        .iter()
        .zip(runs.chunks(spec.realizations))
        .map(|(cell, reps)| {
            let minus: Vec<f64> = reps.iter().filter_map(|r| r.eps_minus).collect();
            let plus: Vec<f64> = reps.iter().filter_map(|r| r.eps_plus).collect();
            let (eps_minus, stderr_minus) = mean_and_stderr(&minus);
            let (eps_plus, stderr_plus) = mean_and_stderr(&plus);
            CellResult {
                cell: *cell,
                eps_minus,
                eps_plus,
                stderr_minus,
                stderr_plus,
                runtime_secs: reps.iter().map(|r| r.secs).sum(),
                inferences: reps.len(),
                degenerate_realizations: reps.iter().filter(|r| r.degenerate).count(),
                t_star: None,
            }
        })
        .collect();

    let mut t_star: BTreeMap<SliceKey, Option<usize>> = BTreeMap::new();
    for res in &results {
        let entry = t_star.entry(res.cell.slice_key()).or_insert(None);
        if res.eps_minus.is_some_and(|e| e < 1.0 - res.cell.theta) {
            *entry = Some(entry.map_or(res.cell.t, |t: usize| t.min(res.cell.t)));
        }
    }
    for res in &mut results {
        res.t_star = t_star[&res.cell.slice_key()];
    }
    Ok(SweepResult { cells: results })
}

impl SweepResult {
    /// `T*` of the slice containing `cell`'s `(n, np, rho, method, r, theta)`.
    pub fn t_star(&self, n: usize, np: f64, rho: f64, method: Method) -> Option<usize> {
        self.cells
            .iter()
            .find(|c| c.cell.n == n && c.cell.np == np && c.cell.rho == rho && c.cell.method == method)
            .and_then(|c| c.t_star)
    }

    pub fn cell(&self, n: usize, np: f64, rho: f64, t: usize, method: Method) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.cell.n == n && c.cell.np == np && c.cell.rho == rho && c.cell.t == t && c.cell.method == method
        })
    }

    pub const CSV_HEADER: &'static str = "n,np,rho,T,method,r,theta,realizations,eps_minus,eps_plus,\
stderr_minus,stderr_plus,runtime_s,degenerate,T_star";

    /// One row per cell in grid order; absent values are empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for c in &self.cells {
            let k = &c.cell;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                k.n,
                fmt_num(k.np),
                fmt_num(k.rho),
                k.t,
                k.method,
                k.r,
                fmt_num(k.theta),
                c.inferences,
                fmt_opt(c.eps_minus),
                fmt_opt(c.eps_plus),
                fmt_opt(c.stderr_minus),
                fmt_opt(c.stderr_plus),
                fmt_num(c.runtime_secs),
                c.degenerate_realizations,
                c.t_star.map_or(String::new(), |t| t.to_string()),
            )?;
        }
        Ok(())
    }
}

/// Shortest decimal form of `x` rounded to 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    rounded.to_string()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or(String::new(), fmt_num)
}
