//! Independent brute-force and Monte Carlo oracles.
//!
//! These exist to validate the metric engine and the constructed-beta
//! standard errors from a second, deliberately naive route, and to
//! regenerate the frozen expected values used by the test suite. All
//! randomness comes from ChaCha8 with explicit seeds and one stream per
//! trial, so every number here is reproducible bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight transcription of the utility function: naive left-to-right
/// summation and product, nothing shared with the engine.
pub fn brute_force_roam(
    beta0: f64,
    additional_weights: &[f64],
    additional_values: &[f64],
    root_values: &[f64],
) -> f64 {
    assert_eq!(additional_weights.len(), additional_values.len());
    let mut additive = beta0;
    for (w, x) in additional_weights.iter().zip(additional_values) {
        additive += w * x;
    }
    let mut product = 1.0;
    for x in root_values {
        product *= x;
    }
    additive * product
}

/// Draw `n` binary replicate outcomes with success probability `true_p`
/// and return them with their aggregate mean.
pub fn simulate_aggregate(true_p: f64, n: u64, seed: u64) -> (Vec<bool>, f64) {
    assert!((0.0..=1.0).contains(&true_p));
    assert!(n >= 1);
    let mut rng = trial_rng(seed, 0);
    let outcomes: Vec<bool> = (0..n).map(|_| rng.random_bool(true_p)).collect();
    let successes = outcomes.iter().filter(|o| **o).count();
    (outcomes, successes as f64 / n as f64)
}

/// Standard deviation of the aggregate mean across seeded trials: the
/// replicate-level answer the constructed-beta sd is meant to approximate.
pub fn empirical_se(true_p: f64, n: u64, trials: u64, seed: u64) -> f64 {
    assert!(trials >= 1000, "need at least 1000 trials for a stable estimate");
    assert!(n >= 1);
    let mut means = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial + 1);
        let successes = (0..n).filter(|_| rng.random_bool(true_p)).count();
        means.push(successes as f64 / n as f64);
    }
    let mean: f64 = means.iter().sum::<f64>() / means.len() as f64;
    let var: f64 = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>()
        / (means.len() - 1) as f64;
    var.sqrt()
}

// Trials use disjoint ChaCha streams of a single seed, so they can be
// partitioned across workers without changing any draw.
fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
