mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocse::covariance::{
    estimate_covariances, lyapunov_residual, solve_lyapunov, solve_lyapunov_direct, LaggedCovariance,
    DEFAULT_LYAPUNOV_MAX_ITER, DEFAULT_LYAPUNOV_TOL,
};
use ocse::network::{
    error_ratios, gelfand_estimate, generate_er_signed, loop_network, spectral_radius, Network,
};
use ocse::process::{embed_markov_order, simulate_gaussian, simulate_var, GaussianProcessSpec, TimeSeries};

#[test]
fn er_link_and_sign_frequencies() {
    let (n, p, draws) = (20usize, 0.2, 1000u64);
    let mut counts = vec![0u32; n * n];
    let mut positive = 0u64;
    let mut links = 0u64;
    for seed in 0..draws {
        let net = generate_er_signed(n, p, 0.8, seed).unwrap();
        for (i, j, w) in net.links() {
            counts[i * n + j] += 1;
            links += 1;
            if w > 0.0 {
                positive += 1;
            }
        }
    }
    // Aggregate over all pairs: 3 standard errors.
    let total = (draws as usize * n * n) as f64;
    let se = (p * (1.0 - p) / total).sqrt();
    assert!((links as f64 / total - p).abs() < 3.0 * se);
    // Per pair, with a Bonferroni-sized band over the 400 pairs.
    let se_pair = (p * (1.0 - p) / draws as f64).sqrt();
    for c in counts {
        assert!((c as f64 / draws as f64 - p).abs() < 4.5 * se_pair, "pair count {c}");
    }
    let se_sign = (0.25 / links as f64).sqrt();
    assert!((positive as f64 / links as f64 - 0.5).abs() < 3.0 * se_sign);
}

#[test]
fn generator_parent_sets_match_weights() {
    for seed in 0..20 {
        let net = common::generic_network(12, 0.3, 0.8, seed);
        for i in 0..12 {
            let declared: Vec<usize> = (0..12).filter(|&j| net.weights()[(i, j)] != 0.0).collect();
            assert_eq!(net.parents(i), declared);
            for &j in &declared {
                assert!(net.has_link(j, i));
            }
        }
    }
    let parents = vec![vec![1, 2], vec![], vec![0]];
    let net = Network::from_parent_sets(&parents).unwrap();
    for (i, p) in parents.iter().enumerate() {
        assert_eq!(&net.parents(i), p);
    }
}

#[test]
fn gelfand_cross_check() {
    // Normal matrices converge fast.
    let lp = loop_network(7, 0.6).unwrap();
    assert!((gelfand_estimate(lp.weights(), 64) - lp.spectral_radius()).abs() < 1e-4);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, -0.7, 0.5]));
    assert!((gelfand_estimate(&d, 64) - 0.7).abs() < 1e-4);
    // Non-normal ER matrices converge more slowly.
    for seed in 0..10 {
        let net = generate_er_signed(30, 0.15, 0.8, seed).unwrap();
        let g = gelfand_estimate(net.weights(), 1 << 12);
        assert!((g - 0.8).abs() < 5e-3, "seed {seed}: {g}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_radius_is_homogeneous(seed in any::<u64>(), n in 2usize..15, c in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let lhs = spectral_radius(&(&m * c));
        let rhs = c.abs() * spectral_radius(&m);
        prop_assert!((lhs - rhs).abs() < 1e-9, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn error_ratios_are_permutation_equivariant(seed in any::<u64>(), n in 2usize..12) {
        let truth = common::generic_network(n, 0.3, 0.7, seed);
        let inferred = common::generic_network(n, 0.3, 0.7, seed ^ 0xABCD);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let a = error_ratios(&truth, &inferred).unwrap();
        let b = error_ratios(&truth.relabeled(&perm).unwrap(), &inferred.relabeled(&perm).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn iterative_and_direct_lyapunov_agree(seed in any::<u64>(), n in 1usize..=20, rho in 0.05f64..0.95) {
        let net = common::generic_network(n, 0.3, rho, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(0.25..4.0)));
        let it = solve_lyapunov(net.weights(), &s, DEFAULT_LYAPUNOV_TOL, DEFAULT_LYAPUNOV_MAX_ITER).unwrap();
        let direct = solve_lyapunov_direct(net.weights(), &s).unwrap();
        prop_assert!((&it - &direct).amax() < 1e-9);
        prop_assert!(lyapunov_residual(net.weights(), &it, &s) < 1e-10);
        // Smallest eigenvalue bounded below by the smallest noise variance.
        let min_noise = s.diagonal().min();
        let min_eig = it.symmetric_eigenvalues().min();
        prop_assert!(min_eig >= min_noise - 1e-8);
    }
}

#[test]
fn simulation_is_bit_deterministic() {
    let net = generate_er_signed(10, 0.3, 0.9, 2).unwrap();
    let spec = GaussianProcessSpec::unit_noise(net, 77);
    let a = simulate_gaussian(&spec, 500).unwrap();
    let b = simulate_gaussian(&spec, 500).unwrap();
    assert_eq!(a.samples(), b.samples());
}

#[test]
fn halves_of_a_long_series_agree() {
    let net = generate_er_signed(5, 0.4, 0.7, 4).unwrap();
    let ts = simulate_gaussian(&GaussianProcessSpec::unit_noise(net, 5), 100_000).unwrap();
    let half = |start: usize| {
        let rows = ts.samples().rows(start, 50_000).into_owned();
        estimate_covariances(&TimeSeries::new(rows).unwrap()).unwrap().phi0
    };
    let (a, b) = (half(0), half(50_000));
    let scale = a.amax();
    for i in 0..5 {
        for j in 0..5 {
            // Relative to the entry, with the largest entry as floor for near-zero ones.
            let denom = a[(i, j)].abs().max(0.1 * scale);
            assert!((a[(i, j)] - b[(i, j)]).abs() / denom < 0.1, "({i},{j}): {} vs {}", a[(i, j)], b[(i, j)]);
        }
    }
}

#[test]
fn sample_covariance_error_shrinks_like_inverse_root_t() {
    let net = generate_er_signed(4, 0.4, 0.6, 8).unwrap();
    let exact = LaggedCovariance::exact(net.weights(), &DMatrix::identity(4, 4)).unwrap();
    let sizes = [1_000usize, 10_000, 100_000];
    let mut logs = Vec::new();
    for &t in &sizes {
        // Average over seeds to steady the estimate of the typical error.
        let reps = 20;
        let mean_err: f64 = (0..reps)
            .map(|s| {
                let ts = simulate_gaussian(&GaussianProcessSpec::unit_noise(net.clone(), 1000 + s), t).unwrap();
                (estimate_covariances(&ts).unwrap().phi0 - &exact.phi0).amax()
            })
            .sum::<f64>()
            / reps as f64;
        logs.push(((t as f64).log10(), mean_err.log10()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
}

#[test]
fn embedding_matches_companion_structure() {
    let a1 = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.0, 0.3]);
    let a2 = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, -0.2, 0.1]);
    let raw = simulate_var(&[a1, a2], &[1.0, 1.0], 300, 6).unwrap();
    let tau = 3;
    let emb = embed_markov_order(&raw, tau).unwrap();
    let n = 2;
    for s in 1..tau {
        for i in 0..n {
            // Node s·n+i lags node (s−1)·n+i by one step.
            let cur = emb.column(s * n + i);
            let prev = emb.column((s - 1) * n + i);
            assert_eq!(&cur[1..], &prev[..prev.len() - 1]);
        }
    }
    for i in 0..n {
        assert_eq!(&emb.column(i)[..], &raw.column(i)[tau - 1..]);
    }
}
