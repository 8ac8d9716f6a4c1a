//! Evidence accumulation and the Beta dominance stopping rule.
//!
//! Each sampled answer adds a pseudo-count to its candidate in an
//! [`EvidenceLedger`]. With `v1`, `v2` the two largest accumulated weights,
//! the posterior `Beta(v1 + 1, v2 + 1)` gives the probability that the
//! leader stays ahead, `1 - I_{1/2}(v1 + 1, v2 + 1)`. Sampling stops once
//! that probability reaches the threshold or the budget is spent.

mod beta;
mod quadrature;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::calibration::{standardize, CalibrationProfile};
use crate::error::{Error, Result};

pub use beta::{ln_beta, ln_gamma, regularized_incomplete_beta};
pub use quadrature::{dominance_probability_quadrature, integrate};

pub const DEFAULT_LAMBDA: f64 = 0.7;
pub const DEFAULT_C_THRESHOLD: f64 = 0.95;
pub const DEFAULT_MAX_BUDGET: usize = 16;

/// Confidence-to-evidence mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMapping {
    /// Unit weight per sample.
    Count,
    /// Raw score over the calibration mean.
    MeanNormalized,
    /// `1 / (1 + exp(-λz))`.
    Sigmoid,
    /// `exp(λz)`.
    Exponential,
    /// `max(1, exp(λz))`.
    BoundedExponential,
}

impl WeightMapping {
    pub const ALL: [WeightMapping; 5] = [
        WeightMapping::Count,
        WeightMapping::MeanNormalized,
        WeightMapping::Sigmoid,
        WeightMapping::Exponential,
        WeightMapping::BoundedExponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightMapping::Count => "count",
            WeightMapping::MeanNormalized => "mean_normalized",
            WeightMapping::Sigmoid => "sigmoid",
            WeightMapping::Exponential => "exponential",
            WeightMapping::BoundedExponential => "bounded_exponential",
        }
    }
}

impl std::fmt::Display for WeightMapping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for WeightMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightMapping::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown weight mapping `{s}`")))
    }
}

/// Knobs of the weighted stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceParams {
    pub lambda: f64,
    pub mapping: WeightMapping,
    pub c_threshold: f64,
    pub max_budget: usize,
}

impl Default for EvidenceParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            mapping: WeightMapping::BoundedExponential,
            c_threshold: DEFAULT_C_THRESHOLD,
            max_budget: DEFAULT_MAX_BUDGET,
        }
    }
}

impl EvidenceParams {
    /// Unit-weight parameters, i.e. the count-based rule.
    pub fn count_based(c_threshold: f64, max_budget: usize) -> Self {
        Self {
            lambda: 0.0,
            mapping: WeightMapping::Count,
            c_threshold,
            max_budget,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.c_threshold > 0.0 && self.c_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "c_threshold must lie in (0, 1), got {}",
                self.c_threshold
            )));
        }
        if self.max_budget == 0 {
            return Err(Error::InvalidConfig("max_budget must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-problem accumulated evidence, keyed by answer in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvidenceLedger {
    entries: Vec<(String, f64)>,
    index: HashMap<String, usize>,
    sample_count: usize,
}

impl EvidenceLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `weight` to `answer`, registering it if unseen.
    pub fn add_sample(&mut self, answer: &str, weight: f64) -> Result<()> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidWeight(weight));
        }
        match self.index.get(answer) {
            Some(&i) => self.entries[i].1 += weight,
            None => {
                self.index.insert(answer.to_owned(), self.entries.len());
                self.entries.push((answer.to_owned(), weight));
            }
        }
        self.sample_count += 1;
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_candidates(&self) -> usize {
        self.entries.len()
    }

    pub fn weight(&self, answer: &str) -> Option<f64> {
        self.index.get(answer).map(|&i| self.entries[i].1)
    }

    /// Candidates and weights in first-seen order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(a, w)| (a.as_str(), *w))
    }

    /// Indices of the leader and runner-up; ties go to the earlier candidate.
    fn top_two(&self) -> (Option<usize>, Option<usize>) {
        let mut first: Option<usize> = None;
        let mut second: Option<usize> = None;
        for (i, (_, w)) in self.entries.iter().enumerate() {
            match first {
                None => first = Some(i),
                Some(f) if *w > self.entries[f].1 => {
                    second = first;
                    first = Some(i);
                }
                _ => match second {
                    None => second = Some(i),
                    Some(s) if *w > self.entries[s].1 => second = Some(i),
                    _ => {}
                },
            }
        }
        (first, second)
    }

    /// The two largest weights `(v1, v2)`; absent candidates count as zero.
    pub fn top_two_weights(&self) -> (f64, f64) {
        let (first, second) = self.top_two();
        let w = |i: Option<usize>| i.map_or(0.0, |i| self.entries[i].1);
        (w(first), w(second))
    }

    /// Posterior probability that the current leader remains dominant.
    pub fn dominance_probability(&self) -> f64 {
        let (v1, v2) = self.top_two_weights();
        dominance_from_weights(v1, v2)
    }

    pub fn should_stop(&self, params: &EvidenceParams) -> bool {
        self.sample_count >= params.max_budget || self.dominance_probability() >= params.c_threshold
    }

    /// Candidate with the largest weight, earliest first-seen on ties.
    pub fn select_answer(&self) -> Result<&str> {
        self.top_two()
            .0
            .map(|i| self.entries[i].0.as_str())
            .ok_or(Error::NoEvidence)
    }
}

/// `1 - I_{1/2}(leader + 1, runner_up + 1)` for the given (unordered) pair.
///
/// Swapping the arguments maps `P` to `1 - P`.
pub fn dominance_from_weights(leader: f64, runner_up: f64) -> f64 {
    let a = leader + 1.0;
    let b = runner_up + 1.0;
    // Evaluated as I_{1/2}(b, a) so the result is exactly 1 - I_{1/2}(a, b)
    // whichever branch of the continued fraction is taken.
    regularized_incomplete_beta(0.5, b, a).expect("weights are non-negative and finite")
}

/// Maps a response score to its evidence weight under `params.mapping`.
pub fn evidence_weight(
    score: f64,
    profile: &CalibrationProfile,
    params: &EvidenceParams,
) -> Result<f64> {
    if profile.sigma.is_nan() || profile.sigma < 0.0 {
        return Err(Error::InvalidProfile(format!(
            "sigma must be >= 0, got {}",
            profile.sigma
        )));
    }
    let z = standardize(score, profile);
    let lz = params.lambda * z;
    Ok(match params.mapping {
        WeightMapping::Count => 1.0,
        WeightMapping::MeanNormalized => {
            if profile.mu.is_nan() || profile.mu <= 0.0 {
                return Err(Error::InvalidProfile(format!(
                    "mean_normalized mapping needs mu > 0, got {}",
                    profile.mu
                )));
            }
            score / profile.mu
        }
        // Floored at the smallest normal so extreme z never underflows to 0.
        WeightMapping::Sigmoid => (1.0 / (1.0 + (-lz).exp())).max(f64::MIN_POSITIVE),
        WeightMapping::Exponential => lz.exp().max(f64::MIN_POSITIVE),
        WeightMapping::BoundedExponential => lz.exp().max(1.0),
    })
}
