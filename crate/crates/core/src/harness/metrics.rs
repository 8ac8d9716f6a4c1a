//! Cost accounting, AUROC and bootstrap intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_N_RESAMPLES: usize = 2000;
pub const DEFAULT_PERCENTILES: (f64, f64) = (2.5, 97.5);

/// Dense-transformer inference cost: `2N` FLOPs per generated token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub n_params: u64,
}

impl CostModel {
    pub fn new(n_params: u64) -> Result<Self> {
        if n_params == 0 {
            return Err(Error::InvalidConfig("n_params must be >= 1".into()));
        }
        Ok(Self { n_params })
    }
}

/// TFLOPs spent generating `num_tokens` tokens.
pub fn cost_tflops(num_tokens: u64, model: &CostModel) -> f64 {
    2.0 * model.n_params as f64 * num_tokens as f64 / 1e12
}

/// Rank-based (Mann-Whitney) AUROC; tied scores share their average rank.
///
/// `labels[i]` is true for positives.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores must not be NaN".into()));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based: positions i..=j share (i + j)/2 + 1
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k]).count();
        pos_rank_sum += avg_rank * tied_pos as f64;
        i = j + 1;
    }
    let n_pos = n_pos as f64;
    let u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg as f64))
}

/// Linear-interpolated percentile (`q` in [0, 100]) of sorted data.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap interval of accuracy, in percent.
pub fn bootstrap_ci(
    correct: &[bool],
    n_resamples: usize,
    percentiles: (f64, f64),
    seed: u64,
) -> Result<(f64, f64)> {
    if correct.is_empty() {
        return Err(Error::EmptyInput("correctness flags"));
    }
    if n_resamples == 0 {
        return Err(Error::InvalidConfig("n_resamples must be >= 1".into()));
    }
    let (lo_q, hi_q) = percentiles;
    if !(0.0..=100.0).contains(&lo_q) || !(0.0..=100.0).contains(&hi_q) || lo_q > hi_q {
        return Err(Error::InvalidConfig(format!(
            "percentiles must satisfy 0 <= lo <= hi <= 100, got ({lo_q}, {hi_q})"
        )));
    }
    let n = correct.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accs: Vec<f64> = (0..n_resamples)
        .map(|_| {
            let hits = (0..n).filter(|_| correct[rng.random_range(0..n)]).count();
            100.0 * hits as f64 / n as f64
        })
        .collect();
    accs.sort_by(f64::total_cmp);
    Ok((
        percentile_sorted(&accs, lo_q),
        percentile_sorted(&accs, hi_q),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pair enumeration: P(score_pos > score_neg) + 0.5 P(tie).
    fn auroc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn cost_examples() {
        let m = CostModel::new(3_000_000_000).unwrap();
        assert_eq!(cost_tflops(500, &m), 3.0);
        assert_eq!(cost_tflops(0, &m), 0.0);
        let m = CostModel::new(27_000_000_000).unwrap();
        assert_eq!(cost_tflops(1000, &m), 54.0);
        assert!(CostModel::new(0).is_err());
    }

    #[test]
    fn auroc_examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(auroc(&s, &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auroc(&[2.0; 4], &[false, true, false, true]).unwrap(), 0.5);
        let v = auroc(&s, &[false, true, false, true]).unwrap();
        assert_eq!(v, auroc_by_pairs(&s, &[false, true, false, true]));
        assert_eq!(v, 0.75);
        assert!(matches!(
            auroc(&s, &[true; 4]),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn bootstrap_degenerate_and_deterministic() {
        assert_eq!(
            bootstrap_ci(&[true; 50], 2000, DEFAULT_PERCENTILES, 1).unwrap(),
            (100.0, 100.0)
        );
        let flags: Vec<bool> = (0..200).map(|i| i % 3 != 0).collect();
        let a = bootstrap_ci(&flags, 2000, DEFAULT_PERCENTILES, 9).unwrap();
        let b = bootstrap_ci(&flags, 2000, DEFAULT_PERCENTILES, 9).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            bootstrap_ci(&[], 10, DEFAULT_PERCENTILES, 0),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn bootstrap_matches_normal_approximation() {
        let flags: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        let (lo, hi) = bootstrap_ci(&flags, 2000, DEFAULT_PERCENTILES, 2024).unwrap();
        // Normal approximation: 50 ± 1.96·sqrt(0.25/1000)·100 ≈ 50 ± 3.099
        let half = 1.959_964 * (0.25f64 / 1000.0).sqrt() * 100.0;
        assert!(lo < 50.0 && hi > 50.0);
        assert!((lo - (50.0 - half)).abs() < 0.5, "lo {lo}");
        assert!((hi - (50.0 + half)).abs() < 0.5, "hi {hi}");
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 10.0, 20.0, 30.0];
        assert_eq!(percentile_sorted(&v, 0.0), 0.0);
        assert_eq!(percentile_sorted(&v, 100.0), 30.0);
        assert_eq!(percentile_sorted(&v, 50.0), 15.0);
    }

    proptest! {
        #[test]
        fn auroc_equals_pair_enumeration(data in prop::collection::vec((0u8..8, any::<bool>()), 2..50)) {
            let scores: Vec<f64> = data.iter().map(|d| f64::from(d.0)).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));
            let fast = auroc(&scores, &labels).unwrap();
            prop_assert!((fast - auroc_by_pairs(&scores, &labels)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&fast));
        }

        #[test]
        fn bootstrap_contains_point_estimate(flags in prop::collection::vec(any::<bool>(), 1..200), seed in 0u64..1000) {
            let (lo, hi) = bootstrap_ci(&flags, 200, DEFAULT_PERCENTILES, seed).unwrap();
            let acc = 100.0 * flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64;
            prop_assert!(lo <= acc && acc <= hi, "({lo}, {hi}) vs {acc}");
        }
    }
}
