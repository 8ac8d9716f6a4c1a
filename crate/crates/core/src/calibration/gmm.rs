//! One-dimensional Gaussian mixtures fitted by EM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every component variance.
pub const VARIANCE_FLOOR: f64 = 1e-10;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;
/// A variance needs two points; components with less effective mass are singular.
pub const MIN_COMPONENT_SUPPORT: f64 = 2.0;

/// Slack tolerated when checking that the log-likelihood never decreases.
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl GmmComponent {
    fn log_density(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * ((2.0 * std::f64::consts::PI * self.variance).ln() + d * d / self.variance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub components: Vec<GmmComponent>,
    pub log_likelihood: f64,
    pub n_points: usize,
    pub iterations: usize,
    /// Log-likelihood after initialization and after every EM step.
    pub log_likelihood_trace: Vec<f64>,
}

impl GmmFit {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Free parameters of a k-component 1-D mixture: `3k - 1`.
    pub fn num_parameters(&self) -> usize {
        3 * self.k() - 1
    }

    /// True when some component rests on fewer than [`MIN_COMPONENT_SUPPORT`]
    /// effective points. Such a component is a spike on a single score whose
    /// likelihood is limited only by the variance floor.
    pub fn is_singular(&self) -> bool {
        self.components
            .iter()
            .any(|c| c.weight * (self.n_points as f64) < MIN_COMPONENT_SUPPORT)
    }

    /// Index of the component with the largest mean (first on ties).
    pub fn high_component(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.components.iter().enumerate() {
            if c.mean > self.components[best].mean {
                best = i;
            }
        }
        best
    }
}

/// Akaike and Bayesian information criteria of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
}

pub fn information_criteria(fit: &GmmFit, n: usize) -> InformationCriteria {
    criteria_from_parts(fit.log_likelihood, fit.num_parameters(), n as f64)
}

/// `AIC = 2p - 2 logL`, `BIC = p ln n - 2 logL`.
pub fn criteria_from_parts(
    log_likelihood: f64,
    num_parameters: usize,
    n: f64,
) -> InformationCriteria {
    let p = num_parameters as f64;
    InformationCriteria {
        aic: 2.0 * p - 2.0 * log_likelihood,
        bic: p * n.ln() - 2.0 * log_likelihood,
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn block_stats(block: &[f64]) -> (f64, f64) {
    let n = block.len() as f64;
    let mean = block.iter().sum::<f64>() / n;
    let var = block.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.max(VARIANCE_FLOOR))
}

/// Fits a `k`-component mixture to `scores` by EM.
///
/// Initialization is deterministic: the sorted scores are cut into `k`
/// contiguous blocks and each block seeds one component. Iteration stops
/// when the log-likelihood gain drops below `tol` or after `max_iter` steps.
/// A decrease of the log-likelihood is reported as a numerical error.
pub fn fit_gmm_1d(scores: &[f64], k: usize, tol: f64, max_iter: usize) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::InvalidConfig(
            "mixture needs at least one component".into(),
        ));
    }
    if scores.len() < 2 * k {
        return Err(Error::InsufficientData {
            needed: 2 * k,
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }

    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut components: Vec<GmmComponent> = (0..k)
        .map(|j| {
            let block = &sorted[j * n / k..(j + 1) * n / k];
            let (mean, variance) = block_stats(block);
            GmmComponent {
                weight: block.len() as f64 / n as f64,
                mean,
                variance,
            }
        })
        .collect();

    let mut resp = vec![0.0; n * k];
    let mut log_terms = vec![0.0; k];
    let mut e_step = |components: &[GmmComponent], resp: &mut [f64]| -> f64 {
        let mut ll = 0.0;
        for (i, &x) in scores.iter().enumerate() {
            for (j, c) in components.iter().enumerate() {
                log_terms[j] = c.weight.ln() + c.log_density(x);
            }
            let lse = log_sum_exp(&log_terms);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (log_terms[j] - lse).exp();
            }
        }
        ll
    };

    let mut ll = e_step(&components, &mut resp);
    let mut trace = vec![ll];
    let mut iterations = 0;
    while iterations < max_iter {
        // M-step
        for (j, c) in components.iter_mut().enumerate() {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nk <= f64::MIN_POSITIVE {
                continue;
            }
            let mean = (0..n).map(|i| resp[i * k + j] * scores[i]).sum::<f64>() / nk;
            let var = (0..n)
                .map(|i| resp[i * k + j] * (scores[i] - mean).powi(2))
                .sum::<f64>()
                / nk;
            c.weight = nk / n as f64;
            c.mean = mean;
            c.variance = var.max(VARIANCE_FLOOR);
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in &mut components {
            c.weight /= total;
        }

        let next = e_step(&components, &mut resp);
        iterations += 1;
        trace.push(next);
        if next < ll - MONOTONE_SLACK * ll.abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "EM log-likelihood decreased at iteration {iterations}: {ll} -> {next}"
            )));
        }
        let gain = next - ll;
        ll = next;
        if gain < tol {
            break;
        }
    }

    Ok(GmmFit {
        components,
        log_likelihood: ll,
        n_points: n,
        iterations,
        log_likelihood_trace: trace,
    })
}

/// Posterior probability that `t` belongs to the higher-mean component of a
/// two-component fit.
pub fn gmm_posterior_high(fit: &GmmFit, t: f64) -> Result<f64> {
    if fit.k() != 2 {
        return Err(Error::InvalidFit(format!(
            "posterior needs exactly 2 components, fit has {}",
            fit.k()
        )));
    }
    let hi = fit.high_component();
    let lo = 1 - hi;
    let log_hi = fit.components[hi].weight.ln() + fit.components[hi].log_density(t);
    let log_lo = fit.components[lo].weight.ln() + fit.components[lo].log_density(t);
    // Logistic of the log-odds; stable when either density underflows.
    let p = 1.0 / (1.0 + (log_lo - log_hi).exp());
    Ok(if p.is_nan() { 0.5 } else { p.clamp(0.0, 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn bimodal(seed: u64, n_each: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = Normal::new(-2.0, 0.5).unwrap();
        let hi = Normal::new(2.0, 0.5).unwrap();
        let mut v: Vec<f64> = (0..n_each).map(|_| lo.sample(&mut rng)).collect();
        v.extend((0..n_each).map(|_| hi.sample(&mut rng)));
        v
    }

    fn fit2(fit: &GmmFit) -> (GmmComponent, GmmComponent) {
        let hi = fit.high_component();
        (fit.components[1 - hi], fit.components[hi])
    }

    #[test]
    fn recovers_well_separated_bimodal() {
        let data = bimodal(7, 500);
        let fit = fit_gmm_1d(&data, 2, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let (lo, hi) = fit2(&fit);
        assert!((lo.mean + 2.0).abs() < 0.1, "{lo:?}");
        assert!((hi.mean - 2.0).abs() < 0.1, "{hi:?}");
        assert!((lo.weight - 0.5).abs() < 0.05);
        assert!((hi.weight - 0.5).abs() < 0.05);
        assert!((lo.weight + hi.weight - 1.0).abs() < 1e-9);
        assert!(fit
            .log_likelihood_trace
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    }

    #[test]
    fn identical_scores_single_component() {
        let fit = fit_gmm_1d(&[3.5; 10], 1, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(fit.components[0].mean, 3.5);
        assert_eq!(fit.components[0].variance, VARIANCE_FLOOR);
        assert_eq!(fit.components[0].weight, 1.0);
    }

    #[test]
    fn two_components_beat_one_on_bimodal_data() {
        let data = bimodal(11, 200);
        let one = fit_gmm_1d(&data, 1, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let two = fit_gmm_1d(&data, 2, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(two.log_likelihood > one.log_likelihood);
        let ic1 = information_criteria(&one, data.len());
        let ic2 = information_criteria(&two, data.len());
        assert!(ic2.bic < ic1.bic);
    }

    #[test]
    fn information_criteria_arithmetic() {
        let ic = criteria_from_parts(0.0, 2, std::f64::consts::E);
        assert_eq!(ic.aic, 4.0);
        assert!((ic.bic - 2.0).abs() < 1e-15);

        let mut fit2 = fit_gmm_1d(&[0.0, 1.0, 5.0, 6.0], 2, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        fit2.log_likelihood = -100.0;
        let ic = information_criteria(&fit2, 100);
        assert_eq!(ic.aic, 210.0);
        assert!((ic.bic - (5.0 * 100f64.ln() + 200.0)).abs() < 1e-12);
        assert!((ic.bic - 223.026).abs() < 1e-3);
    }

    #[test]
    fn insufficient_data() {
        assert!(matches!(
            fit_gmm_1d(&[1.0, 2.0, 3.0], 2, DEFAULT_TOL, DEFAULT_MAX_ITER),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
    }

    fn manual_fit(components: Vec<GmmComponent>) -> GmmFit {
        GmmFit {
            components,
            log_likelihood: 0.0,
            n_points: 10,
            iterations: 0,
            log_likelihood_trace: vec![],
        }
    }

    #[test]
    fn posterior_symmetry_cases() {
        let same = GmmComponent {
            weight: 0.5,
            mean: 1.0,
            variance: 2.0,
        };
        let fit = manual_fit(vec![same, same]);
        for t in [-10.0, 0.0, 1.0, 7.5] {
            assert_eq!(gmm_posterior_high(&fit, t).unwrap(), 0.5);
        }
        let fit = manual_fit(vec![
            GmmComponent {
                weight: 0.5,
                mean: 6.0,
                variance: 1.0,
            },
            GmmComponent {
                weight: 0.5,
                mean: 0.0,
                variance: 1.0,
            },
        ]);
        assert!((gmm_posterior_high(&fit, 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(gmm_posterior_high(&fit, 6.0).unwrap() > 0.99);
        assert!(gmm_posterior_high(&fit, 0.0).unwrap() < 0.01);
        // Far tails stay finite and bounded.
        assert_eq!(gmm_posterior_high(&fit, 1e6).unwrap(), 1.0);
        assert_eq!(gmm_posterior_high(&fit, -1e6).unwrap(), 0.0);
    }

    #[test]
    fn posterior_requires_two_components() {
        let fit = fit_gmm_1d(&[1.0, 2.0, 3.0], 1, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(matches!(
            gmm_posterior_high(&fit, 1.0),
            Err(Error::InvalidFit(_))
        ));
    }

    #[test]
    fn fitting_is_deterministic() {
        let data = bimodal(3, 100);
        let a = fit_gmm_1d(&data, 2, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let b = fit_gmm_1d(&data, 2, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(a, b);
    }
}
