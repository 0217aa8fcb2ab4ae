//! Shared fixtures for the estimator benchmarks.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use riesz_core::functional::MomentVector;
use riesz_core::sieve::GramMatrix;
use riesz_core::{generate_ate_dgp, AteDgpConfig, Dataset};

/// A well-conditioned random solver instance of the given size.
pub fn solver_instance(n: usize, d: usize, seed: u64) -> (GramMatrix, MomentVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    riesz_core::random_instance(n, d, 1e6, &mut rng)
}

/// A treatment-effect dataset sized for trainer benchmarks.
pub fn trainer_dataset(n: usize, seed: u64) -> Dataset {
    generate_ate_dgp(&AteDgpConfig {
        n,
        p: 1,
        tau: 1.0,
        propensity_coefs: vec![0.5],
        propensity_clip: 0.05,
        outcome_coefs: vec![1.0],
        noise_sd: 1.0,
        seed,
    })
    .expect("valid config")
}

/// A rank-deficient Gram matrix (d > n) for the pseudoinverse path.
pub fn rank_deficient_instance(n: usize, d: usize, seed: u64) -> (GramMatrix, MomentVector) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0);
    let g = riesz_core::gram(&riesz_core::FeatureMatrix { values: phi });
    let values = ndarray::Array1::from_shape_fn(d, |_| rng.random::<f64>() * 2.0 - 1.0);
    (
        g,
        MomentVector {
            values,
            sample_size: n,
        },
    )
}
