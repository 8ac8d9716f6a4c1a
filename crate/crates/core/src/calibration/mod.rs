//! Calibration profiles: standardization statistics plus the single-sample
//! gating threshold.
//!
//! Two routes produce a [`CalibrationProfile`]:
//!
//! * [`offline_calibrate`] uses labeled single-sample scores. The gate is the
//!   larger of the mean score of correct samples and the smallest threshold
//!   whose accepted set reaches the target accuracy.
//! * [`online_calibrate`] uses unlabeled scores. A two-component Gaussian
//!   mixture stands in for the labels: the higher-mean component plays the
//!   role of "correct", and its posterior replaces accuracy in the sweep.

mod gmm;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use gmm::{
    criteria_from_parts, fit_gmm_1d, gmm_posterior_high, information_criteria, GmmComponent,
    GmmFit, InformationCriteria, DEFAULT_MAX_ITER, DEFAULT_TOL, MIN_COMPONENT_SUPPORT,
    VARIANCE_FLOOR,
};

pub const DEFAULT_P_TARGET: f64 = 0.9;
pub const DEFAULT_CALIBRATION_SIZE: usize = 128;
/// Smallest score set accepted by [`online_calibrate`].
pub const MIN_ONLINE_SCORES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    Offline,
    Online,
}

impl std::fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CalibrationMode::Offline => "offline",
            CalibrationMode::Online => "online",
        })
    }
}

impl std::str::FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offline" => Ok(CalibrationMode::Offline),
            "online" => Ok(CalibrationMode::Online),
            other => Err(Error::InvalidConfig(format!(
                "unknown calibration mode `{other}`"
            ))),
        }
    }
}

/// Mixture parameters as stored in a profile document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSummary {
    pub pi: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl From<&GmmFit> for GmmSummary {
    fn from(fit: &GmmFit) -> Self {
        Self {
            pi: fit.components.iter().map(|c| c.weight).collect(),
            means: fit.components.iter().map(|c| c.mean).collect(),
            variances: fit.components.iter().map(|c| c.variance).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub mode: CalibrationMode,
    pub mu: f64,
    pub sigma: f64,
    #[serde(
        serialize_with = "ser_extended_f64",
        deserialize_with = "de_extended_f64"
    )]
    pub tau_gate: f64,
    pub p_target: f64,
    pub gmm: Option<GmmSummary>,
    /// Tokens spent generating the calibration responses, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_tokens: Option<u64>,
}

impl CalibrationProfile {
    pub fn new(
        mu: f64,
        sigma: f64,
        tau_gate: f64,
        p_target: f64,
        mode: CalibrationMode,
    ) -> Result<Self> {
        let profile = Self {
            mode,
            mu,
            sigma,
            tau_gate,
            p_target,
            gmm: None,
            calibration_tokens: None,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidProfile(format!(
                "mu must be finite, got {}",
                self.mu
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::InvalidProfile(format!(
                "p_target must lie in (0, 1), got {}",
                self.p_target
            )));
        }
        if self.tau_gate.is_nan() {
            return Err(Error::InvalidProfile("tau_gate is NaN".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let profile: Self = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

// JSON has no infinities; they travel as the strings "inf" / "-inf".
fn ser_extended_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn de_extended_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Text(t) => match t.as_str() {
            "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => Err(serde::de::Error::custom(format!(
                "invalid number `{other}`"
            ))),
        },
    }
}

/// `z = (S - μ)/σ`, or 0 when σ = 0.
pub fn standardize(score: f64, profile: &CalibrationProfile) -> f64 {
    if profile.sigma > 0.0 {
        (score - profile.mu) / profile.sigma
    } else {
        0.0
    }
}

/// Result of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Smallest qualifying candidate.
    At(f64),
    /// No candidate qualified; the sentinel lies above every observed score.
    RejectAll(f64),
}

impl Threshold {
    pub fn value(self) -> f64 {
        match self {
            Threshold::At(v) | Threshold::RejectAll(v) => v,
        }
    }

    pub fn is_reject_all(self) -> bool {
        matches!(self, Threshold::RejectAll(_))
    }
}

/// Threshold that accepts nothing: `max(scores) + 1`.
pub fn reject_all_sentinel(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0
}

/// Smallest observed score `t` such that the accuracy over `{i : S_i >= t}`
/// reaches `p_target`.
pub fn accuracy_threshold_sweep(
    scores: &[f64],
    correct: &[bool],
    p_target: f64,
) -> Result<Threshold> {
    if scores.len() != correct.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores but {} correctness labels",
            scores.len(),
            correct.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("calibration scores"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }

    let mut pairs: Vec<(f64, bool)> = scores
        .iter()
        .copied()
        .zip(correct.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Walk ascending while tracking the suffix {S >= t}.
    let mut remaining = pairs.len();
    let mut remaining_correct = pairs.iter().filter(|p| p.1).count();
    let mut i = 0;
    while i < pairs.len() {
        let t = pairs[i].0;
        if remaining_correct as f64 / remaining as f64 >= p_target {
            return Ok(Threshold::At(t));
        }
        while i < pairs.len() && pairs[i].0 == t {
            remaining -= 1;
            remaining_correct -= usize::from(pairs[i].1);
            i += 1;
        }
    }
    Ok(Threshold::RejectAll(reject_all_sentinel(scores)))
}

/// Sample mean and sample standard deviation (n - 1 denominator).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Labeled calibration from `(score, correct)` pairs.
pub fn offline_calibrate(samples: &[(f64, bool)], p_target: f64) -> Result<CalibrationProfile> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: samples.len(),
        });
    }
    check_p_target(p_target)?;
    let scores: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let correct: Vec<bool> = samples.iter().map(|s| s.1).collect();

    let (mu, sigma) = mean_and_std(&scores);
    let correct_scores: Vec<f64> = samples.iter().filter(|s| s.1).map(|s| s.0).collect();
    let mu_correct = if correct_scores.is_empty() {
        reject_all_sentinel(&scores)
    } else {
        correct_scores.iter().sum::<f64>() / correct_scores.len() as f64
    };
    let tau_accuracy = accuracy_threshold_sweep(&scores, &correct, p_target)?;
    let tau_gate = mu_correct.max(tau_accuracy.value());
    CalibrationProfile::new(mu, sigma, tau_gate, p_target, CalibrationMode::Offline)
}

/// Smallest observed score whose high-component posterior reaches `p_target`.
pub fn posterior_threshold_sweep(fit: &GmmFit, scores: &[f64], p_target: f64) -> Result<Threshold> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &t in &sorted {
        if gmm_posterior_high(fit, t)? >= p_target {
            return Ok(Threshold::At(t));
        }
    }
    Ok(Threshold::RejectAll(reject_all_sentinel(scores)))
}

/// Label-free calibration from raw scores.
pub fn online_calibrate(scores: &[f64], p_target: f64) -> Result<CalibrationProfile> {
    if scores.len() < MIN_ONLINE_SCORES {
        return Err(Error::InsufficientData {
            needed: MIN_ONLINE_SCORES,
            got: scores.len(),
        });
    }
    check_p_target(p_target)?;
    let (mu, sigma) = mean_and_std(scores);
    let fit = fit_gmm_1d(scores, 2, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let mu_approx = fit.components[fit.high_component()].mean;
    let tau_post = posterior_threshold_sweep(&fit, scores, p_target)?;
    let tau_gate = mu_approx.max(tau_post.value());
    let mut profile =
        CalibrationProfile::new(mu, sigma, tau_gate, p_target, CalibrationMode::Online)?;
    profile.gmm = Some(GmmSummary::from(&fit));
    Ok(profile)
}

/// AIC/BIC for each component count in `ks`.
pub fn information_criteria_table(
    scores: &[f64],
    ks: &[usize],
) -> Result<Vec<(usize, GmmFit, InformationCriteria)>> {
    ks.iter()
        .map(|&k| {
            let fit = fit_gmm_1d(scores, k, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let ic = information_criteria(&fit, scores.len());
            Ok((k, fit, ic))
        })
        .collect()
}

/// Component count with the lowest BIC among non-singular fits.
///
/// Singular fits are skipped: their likelihood grows without bound as the
/// spike narrows, so their BIC says nothing about model order.
pub fn select_k_by_bic(table: &[(usize, GmmFit, InformationCriteria)]) -> Option<usize> {
    table
        .iter()
        .filter(|(_, fit, _)| !fit.is_singular())
        .min_by(|a, b| a.2.bic.total_cmp(&b.2.bic))
        .map(|(k, _, _)| *k)
}

fn check_p_target(p_target: f64) -> Result<()> {
    if p_target > 0.0 && p_target < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "p_target must lie in (0, 1), got {p_target}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn brute_force_threshold(scores: &[f64], correct: &[bool], p_target: f64) -> Option<f64> {
        let mut candidates = scores.to_vec();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        candidates.into_iter().find(|&t| {
            let accepted: Vec<bool> = scores
                .iter()
                .zip(correct)
                .filter(|(s, _)| **s >= t)
                .map(|(_, c)| *c)
                .collect();
            let acc = accepted.iter().filter(|c| **c).count() as f64 / accepted.len() as f64;
            acc >= p_target
        })
    }

    #[test]
    fn standardize_cases() {
        let p = CalibrationProfile::new(2.0, 0.5, 3.0, 0.9, CalibrationMode::Offline).unwrap();
        assert_eq!(standardize(2.0, &p), 0.0);
        assert_eq!(standardize(3.0, &p), 2.0);
        let flat = CalibrationProfile::new(2.0, 0.0, 3.0, 0.9, CalibrationMode::Offline).unwrap();
        assert_eq!(standardize(100.0, &flat), 0.0);
    }

    #[test]
    fn sweep_examples() {
        let t = accuracy_threshold_sweep(&[0.1, 0.9], &[false, true], 0.9).unwrap();
        assert_eq!(t, Threshold::At(0.9));
        let t = accuracy_threshold_sweep(&[3.0, 1.0, 2.0], &[true; 3], 0.99).unwrap();
        assert_eq!(t, Threshold::At(1.0));
        let t = accuracy_threshold_sweep(&[3.0, 1.0, 2.0], &[false; 3], 0.5).unwrap();
        assert_eq!(t, Threshold::RejectAll(4.0));
        assert!(matches!(
            accuracy_threshold_sweep(&[1.0], &[true, false], 0.9),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn sweep_groups_tied_scores() {
        // At t = 1 both tied entries are accepted together: accuracy 2/3.
        let t = accuracy_threshold_sweep(&[1.0, 1.0, 2.0], &[false, true, true], 0.6).unwrap();
        assert_eq!(t, Threshold::At(1.0));
        let t = accuracy_threshold_sweep(&[1.0, 1.0, 2.0], &[false, true, true], 0.7).unwrap();
        assert_eq!(t, Threshold::At(2.0));
    }

    #[test]
    fn offline_takes_max_of_branches() {
        // correct {3, 5}, incorrect {1}: mu_correct = 4, sweep gives 3.
        let samples = [(3.0, true), (5.0, true), (1.0, false)];
        let scores = [3.0, 5.0, 1.0];
        let sweep = accuracy_threshold_sweep(&scores, &[true, true, false], 0.9).unwrap();
        assert_eq!(sweep, Threshold::At(3.0));
        let p = offline_calibrate(&samples, 0.9).unwrap();
        assert_eq!(p.tau_gate, 4.0);
        assert_eq!(p.mu, 3.0);
        assert_eq!(p.sigma, 2.0);
        assert_eq!(p.mode, CalibrationMode::Offline);
    }

    #[test]
    fn offline_degenerate_cases() {
        let p = offline_calibrate(&[(2.5, true), (2.5, true), (2.5, true)], 0.9).unwrap();
        assert_eq!(p.tau_gate, 2.5);
        assert_eq!(p.sigma, 0.0);

        let p = offline_calibrate(&[(1.0, false), (2.0, false)], 0.9).unwrap();
        assert_eq!(p.tau_gate, 3.0);

        assert!(matches!(
            offline_calibrate(&[(1.0, true)], 0.9),
            Err(Error::InsufficientData { .. })
        ));
        assert!(offline_calibrate(&[(1.0, true), (2.0, true)], 1.0).is_err());
    }

    #[test]
    fn online_on_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lo = Normal::new(1.0, 0.3).unwrap();
        let hi = Normal::new(9.0, 0.3).unwrap();
        let mut scores: Vec<f64> = (0..60).map(|_| lo.sample(&mut rng)).collect();
        let high: Vec<f64> = (0..40).map(|_| hi.sample(&mut rng)).collect();
        scores.extend(&high);
        let p = online_calibrate(&scores, 0.9).unwrap();
        let min_high = high.iter().copied().fold(f64::INFINITY, f64::min);
        let max_low = scores[..60]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(p.tau_gate > max_low);
        // Gate sits at the high cluster's mean, so it accepts only high-cluster scores.
        assert!(p.tau_gate >= min_high);
        assert!(scores
            .iter()
            .filter(|s| **s >= p.tau_gate)
            .all(|s| high.contains(s)));
        let gmm = p.gmm.as_ref().unwrap();
        assert_eq!(gmm.pi.len(), 2);
        assert_eq!(p.mode, CalibrationMode::Online);
    }

    #[test]
    fn online_two_point_support() {
        let p = online_calibrate(&[0.0, 0.0, 10.0, 10.0], 0.9).unwrap();
        let gmm = p.gmm.unwrap();
        let mut means = gmm.means.clone();
        means.sort_by(f64::total_cmp);
        assert_eq!(means, vec![0.0, 10.0]);
        assert_eq!(p.tau_gate, 10.0);
    }

    #[test]
    fn online_collapsed_mixture_rejects_all() {
        // Both components end up on (numerically) the same point mass, so the
        // posterior never leaves 0.5 and the sweep finds nothing.
        let scores: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { 1.0 } else { 1.0 + 1e-13 })
            .collect();
        let p = online_calibrate(&scores, 0.9).unwrap();
        let fit = fit_gmm_1d(&scores, 2, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let tau_post = posterior_threshold_sweep(&fit, &scores, 0.9).unwrap();
        let mu_approx = fit.components[fit.high_component()].mean;
        assert!(tau_post.is_reject_all());
        assert_eq!(p.tau_gate, mu_approx.max(tau_post.value()));
        assert_eq!(p.tau_gate, reject_all_sentinel(&scores));
    }

    #[test]
    fn online_requires_four_scores() {
        assert!(matches!(
            online_calibrate(&[1.0, 2.0, 3.0], 0.9),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn profile_json_shape() {
        let mut p = online_calibrate(&[0.0, 0.1, 10.0, 10.1, 5.0, 0.2], 0.9).unwrap();
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        for key in ["mode", "mu", "sigma", "tau_gate", "p_target", "gmm"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["mode"], "online");
        for key in ["pi", "means", "variances"] {
            assert!(v["gmm"][key].is_array());
        }
        p.tau_gate = f64::NEG_INFINITY;
        let text = p.to_json_pretty().unwrap();
        assert_eq!(CalibrationProfile::from_json(&text).unwrap(), p);

        let offline =
            CalibrationProfile::new(1.0, 1.0, 2.0, 0.9, CalibrationMode::Offline).unwrap();
        let v = serde_json::to_value(&offline).unwrap();
        assert!(v["gmm"].is_null());
    }

    fn fit_with(weights: &[f64], n_points: usize) -> GmmFit {
        GmmFit {
            components: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| GmmComponent {
                    weight: w,
                    mean: i as f64,
                    variance: 1.0,
                })
                .collect(),
            log_likelihood: 0.0,
            n_points,
            iterations: 1,
            log_likelihood_trace: vec![0.0],
        }
    }

    #[test]
    fn bic_selection_skips_singular_fits() {
        let ic = |bic| InformationCriteria { aic: bic, bic };
        let one_point = fit_with(&[0.499, 0.001, 0.5], 1000);
        assert!(one_point.is_singular());
        assert!(!fit_with(&[0.5, 0.5], 1000).is_singular());
        let table = vec![
            (1, fit_with(&[1.0], 1000), ic(30.0)),
            (2, fit_with(&[0.5, 0.5], 1000), ic(20.0)),
            (3, one_point, ic(10.0)),
        ];
        assert_eq!(select_k_by_bic(&table), Some(2));
        assert_eq!(select_k_by_bic(&table[2..]), None);
    }

    #[test]
    fn profile_validation() {
        assert!(CalibrationProfile::new(0.0, -1.0, 0.0, 0.9, CalibrationMode::Offline).is_err());
        assert!(CalibrationProfile::new(0.0, 1.0, 0.0, 1.0, CalibrationMode::Offline).is_err());
        assert!(CalibrationProfile::from_json(
            r#"{"mode":"offline","mu":0,"sigma":1,"tau_gate":1,"p_target":0,"gmm":null}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn sweep_is_minimal_and_valid(
            data in prop::collection::vec((0u8..20, any::<bool>()), 1..60),
            p_target in 0.05f64..0.99,
        ) {
            let scores: Vec<f64> = data.iter().map(|d| f64::from(d.0) / 4.0).collect();
            let correct: Vec<bool> = data.iter().map(|d| d.1).collect();
            let got = accuracy_threshold_sweep(&scores, &correct, p_target).unwrap();
            match brute_force_threshold(&scores, &correct, p_target) {
                Some(t) => prop_assert_eq!(got, Threshold::At(t)),
                None => {
                    prop_assert!(got.is_reject_all());
                    prop_assert!(scores.iter().all(|s| *s < got.value()));
                }
            }
        }

        #[test]
        fn offline_gate_dominates_both_branches(
            data in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..40),
            p_target in 0.05f64..0.99,
        ) {
            let p = offline_calibrate(&data, p_target).unwrap();
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let correct: Vec<bool> = data.iter().map(|d| d.1).collect();
            let sweep = accuracy_threshold_sweep(&scores, &correct, p_target).unwrap();
            prop_assert!(p.tau_gate >= sweep.value());
            let cs: Vec<f64> = data.iter().filter(|d| d.1).map(|d| d.0).collect();
            if !cs.is_empty() {
                prop_assert!(p.tau_gate >= cs.iter().sum::<f64>() / cs.len() as f64);
            }
        }

        #[test]
        fn posterior_is_a_probability(t in -1e3f64..1e3, seed in 0u64..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = Normal::new(0.0, 3.0).unwrap();
            let scores: Vec<f64> = (0..30).map(|_| n.sample(&mut rng)).collect();
            let fit = fit_gmm_1d(&scores, 2, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let p = gmm_posterior_high(&fit, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
