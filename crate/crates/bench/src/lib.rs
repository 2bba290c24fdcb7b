//! Shared inputs for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

/// `n` gamma(κ, 1) draws, as a post-ReLU activation stand-in.
pub fn gamma_samples(kappa: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Gamma::new(kappa, 1.0).expect("positive shape");
    (0..n).map(|_| g.sample(&mut rng)).collect()
}

/// `n` zero-mean Gaussian weights.
pub fn gaussian_weights(sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, sigma).expect("positive sigma");
    (0..n).map(|_| d.sample(&mut rng)).collect()
}
