//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use reasc_core::calibration::{CalibrationMode, CalibrationProfile};
use reasc_core::harness::{calibrate_corpus, synth_corpus, SynthConfig, TraceCorpus};
use reasc_core::ConfidenceConfig;

/// Equal mixture of N(-2, 0.5²) and N(2, 0.5²).
pub fn bimodal_scores(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let low = Normal::new(-2.0, 0.5).unwrap();
    let high = Normal::new(2.0, 0.5).unwrap();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                high.sample(&mut rng)
            } else {
                low.sample(&mut rng)
            }
        })
        .collect()
}

/// Random Beta parameter pairs in [0.5, 50]².
pub fn beta_pairs(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.random_range(0.5..=50.0), rng.random_range(0.5..=50.0)))
        .collect()
}

pub fn corpus(n_problems: usize, seed: u64) -> TraceCorpus {
    synth_corpus(&SynthConfig {
        n_problems,
        seed,
        ..SynthConfig::default()
    })
    .expect("valid config")
}

/// Offline profile from a separate calibration corpus.
pub fn profile(seed: u64) -> CalibrationProfile {
    calibrate_corpus(
        &corpus(128, seed),
        CalibrationMode::Offline,
        128,
        0.9,
        &ConfidenceConfig::default(),
    )
    .expect("labeled corpus")
}
