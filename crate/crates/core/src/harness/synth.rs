//! Seeded synthetic trace corpora.
//!
//! Every sample is independently correct with probability `prob_correct`.
//! Correct samples carry the gold answer and draw their confidence from
//! `N(conf_mean_correct, conf_std)`; incorrect ones pick a distractor
//! uniformly and draw from `N(conf_mean_incorrect, conf_std)`.
//!
//! With [`TokenTraceConfig`] set, samples carry per-token certainty series
//! instead of a precomputed score: tokens fluctuate around the drawn level
//! and incorrect responses additionally get one contiguous low-certainty
//! dip, which is what window-based metrics are designed to pick up.
//!
//! Each problem draws from its own generator seeded by
//! `(seed, problem_id)`, so output does not depend on generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confidence::TokenCertaintySeries;
use crate::controllers::SampleRecord;
use crate::error::{Error, Result};
use crate::harness::trace::{TraceCorpus, TraceProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenTraceConfig {
    /// Standard deviation of per-token fluctuation around the sample level.
    pub token_noise: f64,
    /// Amount subtracted inside the dip of an incorrect response.
    pub dip_depth: f64,
    /// Dip length in tokens.
    pub dip_length: usize,
}

impl Default for TokenTraceConfig {
    fn default() -> Self {
        Self {
            token_noise: 1.0,
            dip_depth: 3.0,
            dip_length: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_problems: usize,
    pub samples_per_problem: usize,
    /// Wrong answers available per problem.
    pub n_distractors: usize,
    pub prob_correct: f64,
    pub conf_mean_correct: f64,
    pub conf_mean_incorrect: f64,
    pub conf_std: f64,
    /// Inclusive range of response lengths in tokens.
    pub tokens_min: u64,
    pub tokens_max: u64,
    pub token_level: Option<TokenTraceConfig>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_problems: 200,
            samples_per_problem: 16,
            n_distractors: 4,
            prob_correct: 0.7,
            conf_mean_correct: 6.0,
            conf_mean_incorrect: 3.0,
            conf_std: 1.0,
            tokens_min: 200,
            tokens_max: 600,
            token_level: None,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_problems == 0 {
            return bad("n_problems must be >= 1".into());
        }
        if self.samples_per_problem == 0 {
            return bad("samples_per_problem must be >= 1".into());
        }
        if !(self.prob_correct > 0.0 && self.prob_correct <= 1.0) {
            return bad(format!(
                "prob_correct must lie in (0, 1], got {}",
                self.prob_correct
            ));
        }
        if self.prob_correct < 1.0 && self.n_distractors == 0 {
            return bad("n_distractors must be >= 1 when prob_correct < 1".into());
        }
        if !(self.conf_std >= 0.0 && self.conf_std.is_finite()) {
            return bad(format!(
                "conf_std must be finite and >= 0, got {}",
                self.conf_std
            ));
        }
        if !self.conf_mean_correct.is_finite() || !self.conf_mean_incorrect.is_finite() {
            return bad("confidence means must be finite".into());
        }
        if self.tokens_min == 0 || self.tokens_min > self.tokens_max {
            return bad(format!(
                "token range must satisfy 1 <= min <= max, got [{}, {}]",
                self.tokens_min, self.tokens_max
            ));
        }
        if let Some(t) = &self.token_level {
            if !(t.token_noise >= 0.0 && t.token_noise.is_finite()) {
                return bad("token_noise must be finite and >= 0".into());
            }
            if !(t.dip_depth >= 0.0 && t.dip_depth.is_finite()) {
                return bad("dip_depth must be finite and >= 0".into());
            }
        }
        Ok(())
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for one problem, derived from the master seed and its id.
pub fn problem_rng(seed: u64, problem_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ fnv1a64(problem_id.as_bytes())))
}

pub fn problem_id(index: usize) -> String {
    format!("p{index:05}")
}

fn synth_problem(config: &SynthConfig, index: usize) -> Result<TraceProblem> {
    let id = problem_id(index);
    let mut rng = problem_rng(config.seed, &id);
    let gold_value: u32 = rng.random_range(0..100_000);
    let gold = gold_value.to_string();
    let distractors: Vec<String> = (1..=config.n_distractors as u32)
        .map(|d| (gold_value + d).to_string())
        .collect();
    let level = |mean: f64| Normal::new(mean, config.conf_std).expect("validated std");
    let correct_level = level(config.conf_mean_correct);
    let incorrect_level = level(config.conf_mean_incorrect);

    let mut samples = Vec::with_capacity(config.samples_per_problem);
    for _ in 0..config.samples_per_problem {
        let correct = rng.random_bool(config.prob_correct);
        let answer = if correct {
            gold.clone()
        } else {
            distractors[rng.random_range(0..distractors.len())].clone()
        };
        let sample_level = if correct {
            correct_level.sample(&mut rng)
        } else {
            incorrect_level.sample(&mut rng)
        };
        let num_tokens = rng.random_range(config.tokens_min..=config.tokens_max);
        let record = match &config.token_level {
            None => SampleRecord::with_confidence(answer, sample_level, num_tokens),
            Some(tc) => {
                let series =
                    token_series(&mut rng, tc, sample_level, num_tokens as usize, !correct);
                SampleRecord::with_tokens(answer, TokenCertaintySeries::new(series)?)
            }
        };
        samples.push(record);
    }
    Ok(TraceProblem {
        problem_id: id,
        gold: Some(gold),
        samples,
    })
}

fn token_series(
    rng: &mut ChaCha8Rng,
    config: &TokenTraceConfig,
    level: f64,
    len: usize,
    plant_dip: bool,
) -> Vec<f64> {
    let noise = Normal::new(0.0, config.token_noise).expect("validated noise");
    let mut values: Vec<f64> = (0..len).map(|_| level + noise.sample(rng)).collect();
    if plant_dip && config.dip_length > 0 {
        let dip = config.dip_length.min(len);
        let start = rng.random_range(0..=len - dip);
        for v in &mut values[start..start + dip] {
            *v -= config.dip_depth;
        }
    }
    for v in &mut values {
        *v = v.max(0.0);
    }
    values
}

/// Builds a corpus from `config`; identical configs give identical corpora.
pub fn synth_corpus(config: &SynthConfig) -> Result<TraceCorpus> {
    config.validate()?;
    let problems = (0..config.n_problems)
        .into_par_iter()
        .map(|i| synth_problem(config, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceCorpus { problems })
}
