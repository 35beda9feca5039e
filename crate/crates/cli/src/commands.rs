use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocse::covariance::LaggedCovariance;
use ocse::entropy::{causation_entropy, EstimatorContext};
use ocse::inference::{infer_network, DataSource, Method, SignificanceConfig};
use ocse::network::{
    chain_network, error_ratios, generate_er_signed, loop_network, read_edge_list, tree_network, write_edge_list,
    Network, TreeSpec,
};
use ocse::oracles::{chain_cse, loop_cse, tree_cse, TreeQuery};
use ocse::process::{simulate_gaussian, GaussianProcessSpec, TimeSeries};
use ocse::sweep::{fmt_num, run_sweep_with_progress, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "ocse", version, about = "Causal network inference by optimal causation entropy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate a network and write it as an edge list
    Generate(GenerateArgs),
    /// Simulate the linear Gaussian process on a network
    Simulate(SimulateArgs),
    /// Infer causal parents from a time series
    Infer(InferArgs),
    /// Run several inference methods on the same data
    Compare(CompareArgs),
    /// Error ratios over a parameter grid
    Sweep(SweepArgs),
    /// Closed-form causation entropy against the covariance pipeline
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for all randomness
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (standard output when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key = value file with flag defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Topology {
    Er,
    Chain,
    Loop,
    Tree,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TreeShape {
    Random,
    Star,
    Path,
    Complete,
}

#[derive(Debug, Args)]
pub struct Shape {
    #[arg(long, value_enum, default_value_t = Topology::Er)]
    pub topology: Topology,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Loop weight
    #[arg(long, default_value_t = 0.5)]
    pub w: f64,
    #[arg(long, value_enum, default_value_t = TreeShape::Random)]
    pub tree: TreeShape,
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub shape: Shape,
    /// Expected links per node (ER)
    #[arg(long, default_value_t = 5.0)]
    pub np: f64,
    /// Link probability (ER); overrides --np
    #[arg(long)]
    pub p: Option<f64>,
    /// Target spectral radius (ER)
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    /// Edge-list file
    #[arg(long)]
    pub network: PathBuf,
    /// Number of samples
    #[arg(long = "t", alias = "samples")]
    pub t: usize,
    /// Noise standard deviation of every node
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long, default_value_t = 100)]
    pub r: usize,
    #[arg(long, default_value_t = 0.99)]
    pub theta: f64,
    /// Threshold replacing the permutation test for exact covariances
    #[arg(long, default_value_t = 1e-10)]
    pub exact_tolerance: f64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct InferArgs {
    /// Time-series CSV
    #[arg(long, required_unless_present = "exact")]
    pub input: Option<PathBuf>,
    /// Use the exact covariances of this edge-list network (unit noise) instead of data
    #[arg(long, conflicts_with = "input")]
    pub exact: Option<PathBuf>,
    #[arg(long, default_value = "ocse")]
    pub method: Method,
    #[command(flatten)]
    pub test: TestArgs,
    /// Ground-truth edge list; prints the error ratios
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Include per-node traces in the output
    #[arg(long)]
    pub traces: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "ocse,te,granger")]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub test: TestArgs,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "50")]
    pub n: Vec<usize>,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "5")]
    pub np: Vec<f64>,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "0.8")]
    pub rho: Vec<f64>,
    #[arg(long = "t", alias = "samples", action = ArgAction::Set, value_delimiter = ',', default_value = "200")]
    pub t: Vec<usize>,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "ocse")]
    pub methods: Vec<Method>,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "100")]
    pub r: Vec<usize>,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "0.99")]
    pub theta: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub realizations: usize,
    /// Worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Report progress on standard error
    #[arg(long)]
    pub progress: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct OracleArgs {
    #[command(flatten)]
    pub shape: Shape,
    /// Draw chain noise levels uniformly from [0.5, 2] using --seed
    #[arg(long)]
    pub random_noise: bool,
    #[command(flatten)]
    pub common: Common,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Generate(a) => generate(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Infer(a) => infer(a),
        Cmd::Compare(a) => compare(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Oracle(a) => oracle(a),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_network(path: &Path) -> Result<Network> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_edge_list(BufReader::new(f)).with_context(|| format!("reading network {}", path.display()))
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    TimeSeries::read_csv(BufReader::new(f)).with_context(|| format!("reading series {}", path.display()))
}

fn tree_spec(shape: &Shape, seed: u64) -> Result<TreeSpec> {
    Ok(match shape.tree {
        TreeShape::Random => TreeSpec::random(shape.n, seed)?,
        TreeShape::Star => TreeSpec::star(shape.n)?,
        TreeShape::Path => TreeSpec::path(shape.n)?,
        TreeShape::Complete => TreeSpec::complete(shape.n, shape.branching)?,
    })
}

fn generate(a: GenerateArgs) -> Result<()> {
    let n = a.shape.n;
    let net = match a.shape.topology {
        Topology::Er => {
            let p = a.p.unwrap_or(a.np / n as f64);
            generate_er_signed(n, p, a.rho, a.common.seed)?
        }
        Topology::Chain => chain_network(n)?,
        Topology::Loop => loop_network(n, a.shape.w)?,
        Topology::Tree => tree_network(&tree_spec(&a.shape, a.common.seed)?),
    };
    let mut out = output(&a.common.out)?;
    write_edge_list(&net, &mut out)?;
    out.flush()?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let net = read_network(&a.network)?;
    let spec = GaussianProcessSpec { noise_std: vec![a.noise_std; net.n()], network: net, seed: a.common.seed };
    let ts = simulate_gaussian(&spec, a.t)?;
    let mut out = output(&a.common.out)?;
    ts.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn significance(test: &TestArgs, seed: u64) -> Result<SignificanceConfig> {
    let mut cfg = SignificanceConfig::new(test.r, test.theta, seed)?;
    cfg.exact_tolerance = test.exact_tolerance;
    Ok(cfg)
}

fn ratio(x: Option<f64>) -> String {
    x.map_or("undefined".to_string(), fmt_num)
}

fn infer(a: InferArgs) -> Result<()> {
    let source = match (&a.input, &a.exact) {
        (_, Some(net)) => DataSource::from_network(&read_network(net)?)?,
        (Some(input), None) => DataSource::from_series(&read_series(input)?)?,
        (None, None) => bail!("one of --input or --exact is required"),
    };
    let cfg = significance(&a.test, a.common.seed)?;
    let mut inferred = infer_network(&source, a.method, &cfg)?;
    if !a.traces {
        inferred.traces = None;
    }
    for &i in &inferred.degenerate_nodes {
        eprintln!("warning: node {i} skipped, covariance degenerate");
    }
    let json = inferred.to_json()?;
    match &a.common.out {
        Some(path) => {
            std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        None => println!("{json}"),
    }
    if let Some(truth) = &a.truth {
        let truth = read_network(truth)?;
        let r = error_ratios(&truth, &inferred.to_network()?)?;
        let line = format!("eps_minus={} eps_plus={}", ratio(r.false_negative), ratio(r.false_positive));
        if a.common.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let source = DataSource::from_series(&read_series(&a.input)?)?;
    let cfg = significance(&a.test, a.common.seed)?;
    let truth = a.truth.as_deref().map(read_network).transpose()?;
    let mut out = output(&a.common.out)?;
    writeln!(out, "method,links,eps_minus,eps_plus,degenerate_nodes,runtime_s")?;
    for &method in &a.methods {
        let start = Instant::now();
        let inferred = infer_network(&source, method, &cfg)?;
        let secs = start.elapsed().as_secs_f64();
        let (minus, plus) = match &truth {
            Some(t) => {
                let r = error_ratios(t, &inferred.to_network()?)?;
                (r.false_negative.map_or(String::new(), fmt_num), r.false_positive.map_or(String::new(), fmt_num))
            }
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{method},{},{minus},{plus},{},{}",
            inferred.edges.len(),
            inferred.degenerate_nodes.len(),
            fmt_num(secs)
        )?;
    }
    out.flush()?;
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let spec = SweepSpec {
        n: a.n,
        np: a.np,
        rho: a.rho,
        t: a.t,
        methods: a.methods,
        r: a.r,
        theta: a.theta,
        realizations: a.realizations,
        master_seed: a.common.seed,
        jobs: a.jobs,
    };
    let show = a.progress;
    let result = run_sweep_with_progress(&spec, &|done, total| {
        if show {
            eprintln!("[{done}/{total}]");
        }
    })?;
    let mut out = output(&a.common.out)?;
    result.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let n = a.shape.n;
    if n == 0 {
        bail!("--n must be positive");
    }
    let (net, sigmas, closed): (Network, Vec<f64>, Box<dyn Fn(usize, usize) -> ocse::Result<f64>>) =
        match a.shape.topology {
            Topology::Chain => {
                let sigmas: Vec<f64> = if a.random_noise {
                    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
                    (0..n).map(|_| rng.gen_range(0.5..2.0)).collect()
                } else {
                    vec![1.0; n]
                };
                let s = sigmas.clone();
                (chain_network(n)?, sigmas, Box::new(move |j, i| chain_cse(j, i, &s)))
            }
            Topology::Loop => {
                let w = a.shape.w;
                (loop_network(n, w)?, vec![1.0; n], Box::new(move |j, i| loop_cse(j, i, w, n)))
            }
            Topology::Tree => {
                let spec = tree_spec(&a.shape, a.common.seed)?;
                let tq = TreeQuery::new(spec.clone());
                (tree_network(&spec), vec![1.0; n], Box::new(move |j, i| tree_cse(&tq, j, i)))
            }
            Topology::Er => bail!("no closed form for ER networks; use chain, loop or tree"),
        };
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, sigmas.iter().map(|v| v * v)));
    let ctx = EstimatorContext::new(LaggedCovariance::exact(net.weights(), &s)?);
    let mut out = output(&a.common.out)?;
    writeln!(out, "j,i,closed_form,pipeline,abs_diff")?;
    for j in 0..n {
        for i in 0..n {
            let c = closed(j, i)?;
            let p = causation_entropy(&ctx, &[j], &[i], &[])?;
            writeln!(out, "{j},{i},{},{},{}", fmt_num(c), fmt_num(p), fmt_num((c - p).abs()))?;
        }
    }
    out.flush()?;
    Ok(())
}
