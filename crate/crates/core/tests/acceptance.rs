//! Acceptance run: one PASS/FAIL line per criterion; exits nonzero if any fails.

mod common;

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocse::covariance::{
    lyapunov_residual, solve_lyapunov, solve_lyapunov_direct, LaggedCovariance, DEFAULT_LYAPUNOV_MAX_ITER,
    DEFAULT_LYAPUNOV_TOL,
};
use ocse::entropy::discrete::{
    common_driver_system, discrete_causation_entropy, sum_of_bits_system, xor_system, DiscreteJointDistribution,
};
use ocse::entropy::{causation_entropy, EstimatorContext};
use ocse::inference::{brute_force_parents, infer_network, infer_parents_ocse, DataSource, Method, SignificanceConfig};
use ocse::network::{chain_network, generate_er_signed, loop_network, tree_network, Network, TreeSpec};
use ocse::oracles::{chain_cse, loop_cse, tree_cse, TreeQuery};
use ocse::process::{embed_markov_order, simulate_gaussian, simulate_var, GaussianProcessSpec};
use ocse::sweep::{run_sweep, SweepResult, SweepSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn noise_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.gen_range(0.25..4.0)))
}

fn lyapunov() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_residual: f64 = 0.0;
    for seed in 0..50 {
        let rho = rng.gen_range(0.1..0.95);
        let net = generate_er_signed(100, 0.05, rho, seed).unwrap();
        let s = noise_matrix(&mut rng, 100);
        let phi = solve_lyapunov(net.weights(), &s, DEFAULT_LYAPUNOV_TOL, DEFAULT_LYAPUNOV_MAX_ITER).unwrap();
        worst_residual = worst_residual.max(lyapunov_residual(net.weights(), &phi, &s));
    }
    let mut worst_gap: f64 = 0.0;
    for seed in 0..50u64 {
        let n = 2 + (seed as usize % 19);
        let rho = rng.gen_range(0.1..0.95);
        let net = generate_er_signed(n, 0.3, rho, 100 + seed).unwrap();
        let s = noise_matrix(&mut rng, n);
        let it = solve_lyapunov(net.weights(), &s, DEFAULT_LYAPUNOV_TOL, DEFAULT_LYAPUNOV_MAX_ITER).unwrap();
        let direct = solve_lyapunov_direct(net.weights(), &s).unwrap();
        worst_gap = worst_gap.max((it - direct).amax());
    }
    outcome(
        worst_residual < 1e-10 && worst_gap < 1e-9,
        format!("max residual {worst_residual:.2e} (< 1e-10), max solver gap {worst_gap:.2e} (< 1e-9)"),
    )
}

fn closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 3];
    for n in 2..=20 {
        let sigmas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
        let s = DMatrix::from_diagonal(&DVector::from_iterator(n, sigmas.iter().map(|v| v * v)));
        let chain = EstimatorContext::new(LaggedCovariance::exact(chain_network(n).unwrap().weights(), &s).unwrap());
        let w = rng.gen_range(0.05..0.95);
        let lp = common::exact_context(&loop_network(n, w).unwrap());
        let spec = TreeSpec::random(n, rng.gen()).unwrap();
        let tree = common::exact_context(&tree_network(&spec));
        let tq = TreeQuery::new(spec);
        for j in 0..n {
            for i in 0..n {
                let gap = |ctx: &EstimatorContext, c: f64| (causation_entropy(ctx, &[j], &[i], &[]).unwrap() - c).abs();
                worst[0] = worst[0].max(gap(&chain, chain_cse(j, i, &sigmas).unwrap()));
                worst[1] = worst[1].max(gap(&lp, loop_cse(j, i, w, n).unwrap()));
                worst[2] = worst[2].max(gap(&tree, tree_cse(&tq, j, i).unwrap()));
            }
        }
    }
    outcome(
        worst.iter().all(|&g| g < 1e-9),
        format!("max |closed - pipeline|: chain {:.2e}, loop {:.2e}, tree {:.2e} (< 1e-9)", worst[0], worst[1], worst[2]),
    )
}

fn random_nonempty(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut s = common::random_subset(rng, n, 0.3);
    if s.is_empty() {
        s.push(rng.gen_range(0..n));
    }
    s
}

fn entropy_identities() -> Outcome {
    let queries = 20;
    let (mut redundancy, mut screen, mut decomposition): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut weakest_true = f64::INFINITY;
    let mut true_checks = 0;
    for seed in 0..100u64 {
        let n = 2 + (seed as usize % 9);
        let net = generate_er_signed(n, 0.3, 0.8, seed).unwrap();
        let ctx = common::exact_context(&net);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..queries {
            let targets = random_nonempty(&mut rng, n);
            let parents: Vec<usize> = (0..n).filter(|&j| targets.iter().any(|&i| net.has_link(j, i))).collect();
            let sources = random_nonempty(&mut rng, n);
            // Redundancy: J ⊆ K.
            let mut cond = sources.clone();
            cond.extend(common::random_subset(&mut rng, n, 0.3).into_iter().filter(|v| !sources.contains(v)));
            redundancy = redundancy.max(causation_entropy(&ctx, &sources, &targets, &cond).unwrap().abs());
            // No false positives: N_I ⊆ K.
            let mut cond = parents.clone();
            cond.extend(common::random_subset(&mut rng, n, 0.3).into_iter().filter(|v| !parents.contains(v)));
            screen = screen.max(causation_entropy(&ctx, &sources, &targets, &cond).unwrap().abs());
            // True positives: J ⊆ N_I, J ⊄ K.
            if !parents.is_empty() {
                let j: Vec<usize> = parents.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                let j = if j.is_empty() { vec![parents[rng.gen_range(0..parents.len())]] } else { j };
                let cond: Vec<usize> =
                    common::random_subset(&mut rng, n, 0.3).into_iter().filter(|v| *v != j[0]).collect();
                weakest_true = weakest_true.min(causation_entropy(&ctx, &j, &targets, &cond).unwrap());
                true_checks += 1;
            }
            // Decomposition: C_{J→I|K} = C_{K∪J→I} − C_{K→I}.
            let cond = common::random_subset(&mut rng, n, 0.3);
            let c = causation_entropy(&ctx, &sources, &targets, &cond).unwrap();
            let mut joint = cond.clone();
            joint.extend(sources.iter().filter(|s| !cond.contains(s)));
            let whole = causation_entropy(&ctx, &joint, &targets, &[]).unwrap();
            let part = if cond.is_empty() { 0.0 } else { causation_entropy(&ctx, &cond, &targets, &[]).unwrap() };
            decomposition = decomposition.max((c - (whole - part)).abs());
        }
    }
    outcome(
        redundancy < 1e-9 && screen < 1e-9 && weakest_true > 1e-6 && decomposition < 1e-9,
        format!(
            "redundancy {redundancy:.2e}, screening {screen:.2e} (< 1e-9); weakest of {true_checks} true positives \
             {weakest_true:.2e} (> 1e-6); decomposition {decomposition:.2e} (< 1e-9)"
        ),
    )
}

fn optimality() -> Outcome {
    let cfg = SignificanceConfig::default();
    let mut mismatches = Vec::new();
    let mut nodes = 0;
    for seed in 0..100u64 {
        let n = 1 + (seed as usize % 8);
        let net = generate_er_signed(n, 0.3, 0.8, 1000 + seed).unwrap();
        let src = DataSource::from_network(&net).unwrap();
        for i in 0..n {
            nodes += 1;
            let truth = net.parents(i);
            let mut greedy = infer_parents_ocse(&src, i, &cfg).unwrap().pruned;
            greedy.sort_unstable();
            let brute = brute_force_parents(src.context(), &[i], n, cfg.exact_tolerance).unwrap();
            if greedy != truth || brute != truth {
                mismatches.push((seed, i));
            }
        }
    }
    outcome(mismatches.is_empty(), format!("{} of {nodes} nodes disagree {:?}", mismatches.len(), mismatches))
}

fn discrete() -> Outcome {
    let cse = |d: &DiscreteJointDistribution, next: &str, src: &[&str], cond: &[&str]| {
        discrete_causation_entropy(&d.with_roles(&[next], src, cond).unwrap()).unwrap()
    };
    let sum = sum_of_bits_system();
    let drive = common_driver_system();
    let xor = xor_system();
    let got = [
        (cse(&sum, "x1_next", &["x2"], &[]), 0.5 * LN_2),
        (cse(&sum, "x1_next", &["x2"], &["x3"]), LN_2),
        (cse(&drive, "x1_next", &["x2"], &[]), LN_2),
        (cse(&drive, "x1_next", &["x2"], &["x3"]), 0.0),
        (cse(&xor, "x_next", &["y"], &[]), 0.0),
        (cse(&xor, "x_next", &["z"], &[]), 0.0),
        (cse(&xor, "x_next", &["y", "z"], &[]), LN_2),
    ];
    let worst = got.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let vals: Vec<String> = got.iter().map(|(a, _)| format!("{a:.6}")).collect();
    outcome(worst < 1e-12, format!("values [{}] nats, max error {worst:.1e} (< 1e-12)", vals.join(", ")))
}

fn tree_overreach() -> Outcome {
    let spec = TreeSpec::complete(13, 3).unwrap();
    let net = tree_network(&spec);
    let src = DataSource::from_network(&net).unwrap();
    let cfg = SignificanceConfig::default();
    let te = infer_network(&src, Method::TransferEntropy, &cfg).unwrap().to_network().unwrap();
    let ocse = infer_network(&src, Method::Ocse, &cfg).unwrap().to_network().unwrap();
    let mut te_matches_levels = true;
    for i in 0..13 {
        for j in 0..13 {
            te_matches_levels &= te.has_link(j, i) == (spec.depth(i) == spec.depth(j) + 1);
        }
    }
    let superset = net.links().iter().all(|&(i, j, _)| te.has_link(j, i)) && te.link_count() > net.link_count();
    let truth = Network::from_parent_sets(&(0..13).map(|i| net.parents(i)).collect::<Vec<_>>()).unwrap();
    outcome(
        te_matches_levels && superset && ocse == truth,
        format!(
            "TE links {} = adjacent-level pairs: {te_matches_levels}, strict superset of {} tree links: {superset}; \
             oCSE equals tree: {}",
            te.link_count(),
            net.link_count(),
            ocse == truth
        ),
    )
}

fn sweep(n: &[usize], np: &[f64], rho: &[f64], t: &[usize], methods: &[Method], realizations: usize, seed: u64) -> SweepResult {
    run_sweep(&SweepSpec {
        n: n.to_vec(),
        np: np.to_vec(),
        rho: rho.to_vec(),
        t: t.to_vec(),
        methods: methods.to_vec(),
        r: vec![100],
        theta: vec![0.99],
        realizations,
        master_seed: seed,
        jobs: None,
    })
    .unwrap()
}

fn size_scaling() -> Outcome {
    let res = sweep(&[50, 100], &[5.0], &[0.8], &[200], &[Method::Ocse, Method::Granger], 10, 7);
    let cell = |n, m| res.cell(n, 5.0, 0.8, 200, m).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [50, 100] {
        let c = cell(n, Method::Ocse);
        let (minus, plus) = (c.eps_minus.unwrap(), c.eps_plus.unwrap());
        pass &= minus <= 0.10 && plus <= 0.05;
        parts.push(format!("oCSE n={n}: eps- {minus:.4} eps+ {plus:.4}"));
    }
    let g = cell(100, Method::Granger);
    let ocse_minus = cell(100, Method::Ocse).eps_minus.unwrap();
    let granger_minus = g.eps_minus.unwrap();
    let granger_ok = g.degenerate_realizations > 0 || granger_minus >= 3.0 * ocse_minus;
    pass &= granger_ok;
    parts.push(format!(
        "Granger n=100: eps- {granger_minus:.4} (>= 3x {ocse_minus:.4}: {}), degenerate runs {}",
        granger_minus >= 3.0 * ocse_minus,
        g.degenerate_realizations
    ));
    outcome(pass, parts.join("; "))
}

fn radius_scaling() -> Outcome {
    let rhos = [0.2, 0.5, 0.8, 0.95];
    let res = sweep(&[50], &[5.0], &rhos, &[2000], &[Method::Ocse, Method::TransferEntropy], 10, 8);
    let plus = |rho, m| res.cell(50, 5.0, rho, 2000, m).unwrap().eps_plus.unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for rho in rhos {
        let (o, t) = (plus(rho, Method::Ocse), plus(rho, Method::TransferEntropy));
        pass &= o <= 3.0 * 0.01;
        parts.push(format!("rho={rho}: oCSE eps+ {o:.4} TE eps+ {t:.4}"));
    }
    let ratio = plus(0.95, Method::TransferEntropy) / plus(0.95, Method::Ocse);
    pass &= ratio >= 5.0;
    parts.push(format!("TE/oCSE at 0.95 = {ratio:.1} (>= 5)"));
    outcome(pass, parts.join("; "))
}

/// `100 · 2^(k/4)`, rounded.
fn t_grid(k_max: usize) -> Vec<usize> {
    (0..=k_max).map(|k| (100.0 * 2f64.powf(k as f64 / 4.0)).round() as usize).collect()
}

fn saturation() -> Outcome {
    let sat = sweep(&[60], &[5.0], &[0.8], &[500, 2000, 8000], &[Method::Ocse], 10, 9);
    let mut pass = true;
    let mut parts = Vec::new();
    for c in &sat.cells {
        let p = c.eps_plus.unwrap();
        pass &= (0.0..=0.03).contains(&p);
        parts.push(format!("T={} eps+ {p:.4}", c.cell.t));
    }
    let sizes = [30, 60, 120];
    let res = sweep(&sizes, &[5.0], &[0.8], &t_grid(8), &[Method::Ocse], 10, 10);
    let stars: Vec<Option<usize>> = sizes.iter().map(|&n| res.t_star(n, 5.0, 0.8, Method::Ocse)).collect();
    let found: Vec<usize> = stars.iter().flatten().copied().collect();
    let spread = if found.len() == sizes.len() {
        *found.iter().max().unwrap() as f64 / *found.iter().min().unwrap() as f64
    } else {
        f64::INFINITY
    };
    pass &= spread <= 1.5;
    parts.push(format!("T* for n=30,60,120: {stars:?}, max/min {spread:.3} (<= 1.5)"));
    outcome(pass, parts.join("; "))
}

fn degree_scaling() -> Outcome {
    let degrees = [4.0, 8.0, 16.0];
    let res = sweep(&[60], &degrees, &[0.8], &t_grid(16), &[Method::Ocse], 10, 11);
    let stars: Vec<Option<usize>> = degrees.iter().map(|&np| res.t_star(60, np, 0.8, Method::Ocse)).collect();
    let monotone = stars.iter().all(Option::is_some) && stars.windows(2).all(|w| w[0] < w[1]);
    let ratio = match (stars[0], stars[2]) {
        (Some(a), Some(b)) => b as f64 / a as f64,
        _ => f64::NAN,
    };
    outcome(
        monotone && (2.0..=8.0).contains(&ratio),
        format!("T* for np=4,8,16: {stars:?}; increasing {monotone}; T*(16)/T*(4) {ratio:.2} (in [2, 8])"),
    )
}

fn markov_embedding() -> Outcome {
    let lags = [DMatrix::from_element(1, 1, 0.4), DMatrix::from_element(1, 1, 0.3)];
    let cfg = SignificanceConfig::default();
    let mut hits = 0;
    for s in 0..20u64 {
        let raw = simulate_var(&lags, &[1.0], 10_000, 300 + s).unwrap();
        let emb = embed_markov_order(&raw, 2).unwrap();
        let src = DataSource::from_series(&emb).unwrap();
        let trace = infer_parents_ocse(&src, 0, &SignificanceConfig { seed: s, ..cfg }).unwrap();
        if trace.pruned.contains(&0) && trace.pruned.contains(&1) {
            hits += 1;
        }
    }
    outcome(hits >= 18, format!("both lags recovered in {hits}/20 trials (>= 18)"))
}

fn null_calibration() -> Outcome {
    let (n, t, reps) = (20usize, 2000usize, 10u64);
    let cfg = SignificanceConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for method in [Method::Ocse, Method::TransferEntropy] {
        let (mut links, mut pairs) = (0usize, 0usize);
        for s in 0..reps {
            let ts = simulate_gaussian(&GaussianProcessSpec::unit_noise(Network::empty(n), 700 + s), t).unwrap();
            let src = DataSource::from_series(&ts).unwrap();
            let inferred = infer_network(&src, method, &SignificanceConfig { seed: s, ..cfg }).unwrap();
            links += inferred.edges.len();
            pairs += if method == Method::TransferEntropy { n * (n - 1) } else { n * n };
        }
        let rate = links as f64 / pairs as f64;
        let se = (0.01 * 0.99 / pairs as f64).sqrt();
        let ok = (rate - 0.01).abs() <= 3.0 * se;
        pass &= ok;
        parts.push(format!("{method}: {links}/{pairs} = {rate:.4} (0.01 +- {:.4})", 3.0 * se));
    }
    outcome(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("Lyapunov solver residual and cross-check", lyapunov),
        ("closed-form oracles match the pipeline", closed_forms),
        ("causation entropy identities", entropy_identities),
        ("exact oCSE = brute force = truth", optimality),
        ("discrete counterexamples", discrete),
        ("tree transfer-entropy overreach", tree_overreach),
        ("error ratios vs network size at T=200", size_scaling),
        ("false positives vs spectral radius", radius_scaling),
        ("false-positive saturation and T* vs n", saturation),
        ("T* grows with mean degree", degree_scaling),
        ("order-2 process via delay embedding", markov_embedding),
        ("null calibration", null_calibration),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict}: {name} | {} [{:.1}s]", k + 1, out.detail, start.elapsed().as_secs_f64());
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
