//! Token- and response-level confidence signals.
//!
//! A token's self-certainty is the negative mean log-probability over the
//! whole vocabulary at that decoding step: a sharp distribution scores high,
//! a flat one scores `ln V`. Responses are scored by aggregating the per-token
//! series, either globally or over sliding windows ("groups") so that short
//! stretches of low certainty are not averaged away.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Allowed deviation of a probability vector's sum from one.
pub const SUM_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_WINDOW_SIZE: usize = 128;
pub const DEFAULT_BOTTOM_FRACTION: f64 = 0.10;

/// Ordered per-token self-certainty values of one response (nats).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TokenCertaintySeries(Vec<f64>);

impl TokenCertaintySeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("token certainty series"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "token certainty #{i} must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for TokenCertaintySeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        Self::new(values).map_err(serde::de::Error::custom)
    }
}

/// How a token series is reduced to one response score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMetric {
    /// Mean over all tokens.
    ResponseMean,
    /// Mean of all sliding-window group confidences.
    AverageGroup,
    /// Confidence of the final window.
    TailGroup,
    /// Mean of the lowest `bottom_fraction` of group confidences.
    BottomFractionGroup,
}

impl ConfidenceMetric {
    pub const ALL: [ConfidenceMetric; 4] = [
        ConfidenceMetric::ResponseMean,
        ConfidenceMetric::AverageGroup,
        ConfidenceMetric::TailGroup,
        ConfidenceMetric::BottomFractionGroup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConfidenceMetric::ResponseMean => "response_mean",
            ConfidenceMetric::AverageGroup => "average_group",
            ConfidenceMetric::TailGroup => "tail_group",
            ConfidenceMetric::BottomFractionGroup => "bottom_fraction_group",
        }
    }
}

impl std::fmt::Display for ConfidenceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ConfidenceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConfidenceMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown confidence metric `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceConfig {
    pub window_size: usize,
    pub bottom_fraction: f64,
    pub metric: ConfidenceMetric,
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW_SIZE,
            bottom_fraction: DEFAULT_BOTTOM_FRACTION,
            metric: ConfidenceMetric::BottomFractionGroup,
        }
    }
}

impl ConfidenceConfig {
    pub fn with_metric(metric: ConfidenceMetric) -> Self {
        Self {
            metric,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::InvalidConfig("window_size must be >= 1".into()));
        }
        if !(self.bottom_fraction > 0.0 && self.bottom_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bottom_fraction must lie in (0, 1], got {}",
                self.bottom_fraction
            )));
        }
        Ok(())
    }
}

/// Self-certainty of one decoding step: `-(1/V) * sum_w ln max(p_w, 1e-12)`.
pub fn token_self_certainty(probs: &[f64]) -> Result<f64> {
    if probs.len() < 2 {
        return Err(Error::InvalidDistribution(format!(
            "vocabulary must have at least 2 entries, got {}",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDistribution(
            "entries must be finite and non-negative".into(),
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "entries sum to {total}, expected 1"
        )));
    }
    let log_sum: f64 = probs.iter().map(|p| p.max(PROB_FLOOR).ln()).sum();
    Ok(-log_sum / probs.len() as f64)
}

/// Mean token self-certainty of a response.
pub fn response_self_certainty(series: &TokenCertaintySeries) -> f64 {
    mean(series.values())
}

/// Sliding-window means over `series`.
///
/// A series no longer than the window collapses to a single group holding
/// the overall mean.
pub fn group_confidences(
    series: &TokenCertaintySeries,
    window_size: usize,
    stride: usize,
) -> Result<Vec<f64>> {
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be >= 1".into()));
    }
    if window_size == 0 {
        return Err(Error::InvalidConfig("window_size must be >= 1".into()));
    }
    let values = series.values();
    if values.len() <= window_size {
        return Ok(vec![mean(values)]);
    }
    if window_size == 1 {
        return Ok(values.iter().step_by(stride).copied().collect());
    }

    let m = window_size as f64;
    let n_windows = values.len() - window_size + 1;
    let mut groups = Vec::with_capacity(n_windows.div_ceil(stride));
    if stride == 1 {
        let mut sum: f64 = values[..window_size].iter().sum();
        groups.push(sum / m);
        for i in 1..n_windows {
            sum += values[i + window_size - 1] - values[i - 1];
            groups.push(sum / m);
        }
    } else {
        for start in (0..n_windows).step_by(stride) {
            let sum: f64 = values[start..start + window_size].iter().sum();
            groups.push(sum / m);
        }
    }
    Ok(groups)
}

/// Number of groups in the bottom set: `max(1, floor(fraction * n))`.
pub fn bottom_count(n_groups: usize, fraction: f64) -> usize {
    // 1e-9 absorbs representation error such as 0.3 * 10 = 3.0000000000000004
    // going the other way (e.g. 0.29 * 100 = 28.999999999999996).
    let raw = (fraction * n_groups as f64 + 1e-9).floor() as usize;
    raw.clamp(1, n_groups.max(1))
}

/// Mean of the `n_b` lowest group confidences, ties broken by earlier position.
///
/// Selected groups are summed in their original order, so with
/// `fraction = 1` the result is bit-identical to the plain group mean.
pub fn bottom_fraction_mean(groups: &[f64], fraction: f64) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::EmptyInput("group confidences"));
    }
    let n_b = bottom_count(groups.len(), fraction);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| groups[a].total_cmp(&groups[b]).then(a.cmp(&b)));
    let mut chosen = order[..n_b].to_vec();
    chosen.sort_unstable();
    let sum: f64 = chosen.iter().map(|&i| groups[i]).sum();
    Ok(sum / n_b as f64)
}

/// Response score under `config.metric` (stride-1 windows).
pub fn confidence_score(series: &TokenCertaintySeries, config: &ConfidenceConfig) -> Result<f64> {
    config.validate()?;
    match config.metric {
        ConfidenceMetric::ResponseMean => Ok(response_self_certainty(series)),
        ConfidenceMetric::AverageGroup => {
            let groups = group_confidences(series, config.window_size, 1)?;
            Ok(mean(&groups))
        }
        ConfidenceMetric::TailGroup => {
            let groups = group_confidences(series, config.window_size, 1)?;
            Ok(*groups.last().expect("at least one group"))
        }
        ConfidenceMetric::BottomFractionGroup => {
            let groups = group_confidences(series, config.window_size, 1)?;
            bottom_fraction_mean(&groups, config.bottom_fraction)
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
