#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocse::covariance::LaggedCovariance;
use ocse::entropy::EstimatorContext;
use ocse::network::{spectral_radius, Network};

/// Random stable network with link probability `p` and signed weights of
/// random magnitude in [0.5, 1.5], rescaled to spectral radius `rho` unless
/// nilpotent.
pub fn generic_network(n: usize, p: f64, rho: f64, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if rng.gen::<f64>() < p {
                let mag: f64 = rng.gen_range(0.5..1.5);
                w[(i, j)] = if rng.gen_bool(0.5) { mag } else { -mag };
            }
        }
    }
    let r = spectral_radius(&w);
    if r > 0.0 {
        w *= rho / r;
    } else {
        // Nilpotent: any scale is stable; keep entries modest.
        w *= 0.5;
    }
    Network::from_weights(w).unwrap()
}

pub fn exact_context(net: &Network) -> EstimatorContext {
    let s = DMatrix::identity(net.n(), net.n());
    EstimatorContext::new(LaggedCovariance::exact(net.weights(), &s).unwrap())
}

/// Random subset of `0..n`, each element kept with probability `p`.
pub fn random_subset(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<usize> {
    (0..n).filter(|_| rng.gen::<f64>() < p).collect()
}
