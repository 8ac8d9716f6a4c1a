//! Corpus-level evaluation, calibration slices and parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::answer::canonicalize;
use crate::calibration::{
    offline_calibrate, online_calibrate, CalibrationMode, CalibrationProfile,
    DEFAULT_CALIBRATION_SIZE, DEFAULT_P_TARGET,
};
use crate::confidence::{ConfidenceConfig, ConfidenceMetric};
use crate::controllers::{
    run_asc, run_esc, run_reasc, run_sc, Decision, ReplaySource, Stage, DEFAULT_ESC_WINDOW,
    DEFAULT_SC_BUDGET,
};
use crate::error::{Error, Result};
use crate::evidence::{EvidenceParams, DEFAULT_C_THRESHOLD, DEFAULT_MAX_BUDGET};
use crate::harness::metrics::{auroc, bootstrap_ci, cost_tflops, CostModel, DEFAULT_PERCENTILES};
use crate::harness::trace::TraceCorpus;

/// A controller together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    Sc {
        k: usize,
    },
    Esc {
        window: usize,
        max_k: usize,
    },
    Asc {
        c_threshold: f64,
        max_k: usize,
    },
    Reasc {
        profile: CalibrationProfile,
        params: EvidenceParams,
        confidence: ConfidenceConfig,
    },
}

impl MethodSpec {
    pub fn sc() -> Self {
        MethodSpec::Sc {
            k: DEFAULT_SC_BUDGET,
        }
    }

    pub fn esc() -> Self {
        MethodSpec::Esc {
            window: DEFAULT_ESC_WINDOW,
            max_k: DEFAULT_MAX_BUDGET,
        }
    }

    pub fn asc() -> Self {
        MethodSpec::Asc {
            c_threshold: DEFAULT_C_THRESHOLD,
            max_k: DEFAULT_MAX_BUDGET,
        }
    }

    pub fn reasc(profile: CalibrationProfile) -> Self {
        MethodSpec::Reasc {
            profile,
            params: EvidenceParams::default(),
            confidence: ConfidenceConfig::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Sc { .. } => "sc",
            MethodSpec::Esc { .. } => "esc",
            MethodSpec::Asc { .. } => "asc",
            MethodSpec::Reasc { .. } => "reasc",
        }
    }

    fn run(&self, samples: &[crate::controllers::SampleRecord]) -> Result<Decision> {
        let mut source = ReplaySource::new(samples);
        match self {
            MethodSpec::Sc { k } => run_sc(&mut source, *k),
            MethodSpec::Esc { window, max_k } => run_esc(&mut source, *window, *max_k),
            MethodSpec::Asc { c_threshold, max_k } => run_asc(&mut source, *c_threshold, *max_k),
            MethodSpec::Reasc {
                profile,
                params,
                confidence,
            } => run_reasc(&mut source, profile, params, confidence),
        }
    }
}

/// Bootstrap settings for the accuracy interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub n_resamples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub n_problems: usize,
    /// Fraction of problems answered correctly, in [0, 1].
    pub accuracy: f64,
    pub mean_tflops: f64,
    /// `accuracy · 100 / mean_tflops`; 0 when no compute was spent.
    pub acc_per_tf: f64,
    pub mean_samples: f64,
    pub total_samples: usize,
    pub stage1_accept_ratio: Option<f64>,
    pub stage1_accept_accuracy: Option<f64>,
    /// Bootstrap interval of accuracy, in percent.
    pub ci95: Option<(f64, f64)>,
    /// Cost of generating the calibration responses, reported separately.
    pub calibration_tflops: Option<f64>,
}

/// Per-problem outcome alongside the aggregate report.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: RunReport,
    pub decisions: Vec<Decision>,
    pub correct: Vec<bool>,
}

/// Runs `method` on every problem of `corpus` and aggregates the metrics.
///
/// Problems are evaluated in parallel; results are gathered in corpus order
/// so the report does not depend on scheduling.
pub fn evaluate_detailed(
    corpus: &TraceCorpus,
    method: &MethodSpec,
    cost: &CostModel,
    bootstrap: Option<BootstrapOptions>,
) -> Result<Evaluation> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    if let Some(p) = corpus.problems.iter().find(|p| p.gold.is_none()) {
        return Err(Error::MissingLabel(p.problem_id.clone()));
    }

    let decisions: Vec<Decision> = corpus
        .problems
        .par_iter()
        .map(|p| method.run(&p.samples))
        .collect::<Result<_>>()?;

    let correct: Vec<bool> = corpus
        .problems
        .iter()
        .zip(&decisions)
        .map(|(p, d)| canonicalize(p.gold.as_deref().expect("checked")) == d.answer)
        .collect();

    let n = decisions.len() as f64;
    let accuracy = correct.iter().filter(|c| **c).count() as f64 / n;
    let mean_tflops = decisions
        .iter()
        .map(|d| cost_tflops(d.tokens_used, cost))
        .sum::<f64>()
        / n;
    let total_samples: usize = decisions.iter().map(|d| d.samples_used).sum();

    let (stage1_accept_ratio, stage1_accept_accuracy, calibration_tflops) = match method {
        MethodSpec::Reasc { profile, .. } => {
            let gated: Vec<bool> = decisions
                .iter()
                .zip(&correct)
                .filter(|(d, _)| d.resolved_at_stage == Stage::Gate)
                .map(|(_, c)| *c)
                .collect();
            let ratio = gated.len() as f64 / n;
            let acc = (!gated.is_empty())
                .then(|| gated.iter().filter(|c| **c).count() as f64 / gated.len() as f64);
            let calib = profile.calibration_tokens.map(|t| cost_tflops(t, cost));
            (Some(ratio), acc, calib)
        }
        _ => (None, None, None),
    };

    let ci95 = bootstrap
        .map(|b| bootstrap_ci(&correct, b.n_resamples, DEFAULT_PERCENTILES, b.seed))
        .transpose()?;

    Ok(Evaluation {
        report: RunReport {
            method: method.name().to_owned(),
            n_problems: decisions.len(),
            accuracy,
            mean_tflops,
            acc_per_tf: acc_per_tf(accuracy, mean_tflops),
            mean_samples: total_samples as f64 / n,
            total_samples,
            stage1_accept_ratio,
            stage1_accept_accuracy,
            ci95,
            calibration_tflops,
        },
        decisions,
        correct,
    })
}

pub fn evaluate(
    corpus: &TraceCorpus,
    method: &MethodSpec,
    cost: &CostModel,
    bootstrap: Option<BootstrapOptions>,
) -> Result<RunReport> {
    evaluate_detailed(corpus, method, cost, bootstrap).map(|e| e.report)
}

/// Accuracy in percent per TFLOP.
pub fn acc_per_tf(accuracy: f64, mean_tflops: f64) -> f64 {
    if mean_tflops > 0.0 {
        accuracy * 100.0 / mean_tflops
    } else {
        0.0
    }
}

/// First-response scores with correctness (when labeled) and the tokens spent.
pub type CalibrationItems = (Vec<(f64, Option<bool>)>, u64);

/// First-response score (and correctness, when labeled) of the first
/// `size` problems, plus the tokens spent producing them.
pub fn calibration_slice(
    corpus: &TraceCorpus,
    size: usize,
    confidence: &ConfidenceConfig,
) -> Result<CalibrationItems> {
    let slice = &corpus.problems[..size.min(corpus.len())];
    let mut tokens = 0;
    let items = slice
        .iter()
        .map(|p| {
            let first = &p.samples[0];
            tokens += first.num_tokens;
            let score = first.score(confidence)?;
            let correct = p
                .gold
                .as_deref()
                .map(|g| canonicalize(g) == canonicalize(&first.answer));
            Ok((score, correct))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((items, tokens))
}

/// Calibrates on the first response of the first `size` problems.
pub fn calibrate_corpus(
    corpus: &TraceCorpus,
    mode: CalibrationMode,
    size: usize,
    p_target: f64,
    confidence: &ConfidenceConfig,
) -> Result<CalibrationProfile> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("calibration corpus"));
    }
    let (items, tokens) = calibration_slice(corpus, size, confidence)?;
    let mut profile = match mode {
        CalibrationMode::Offline => {
            let labeled = items
                .iter()
                .zip(&corpus.problems)
                .map(|((s, c), p)| {
                    c.map(|c| (*s, c))
                        .ok_or_else(|| Error::MissingLabel(p.problem_id.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            offline_calibrate(&labeled, p_target)?
        }
        CalibrationMode::Online => {
            let scores: Vec<f64> = items.iter().map(|(s, _)| *s).collect();
            online_calibrate(&scores, p_target)?
        }
    };
    profile.calibration_tokens = Some(tokens);
    Ok(profile)
}

/// AUROC of each confidence metric for per-sample correctness.
pub fn metric_aurocs(
    corpus: &TraceCorpus,
    window_size: usize,
    bottom_fraction: f64,
) -> Result<Vec<(ConfidenceMetric, f64)>> {
    let mut labels = Vec::new();
    for p in &corpus.problems {
        let gold = p
            .gold
            .as_deref()
            .map(canonicalize)
            .ok_or_else(|| Error::MissingLabel(p.problem_id.clone()))?;
        labels.extend(p.samples.iter().map(|s| canonicalize(&s.answer) == gold));
    }
    ConfidenceMetric::ALL
        .into_iter()
        .map(|metric| {
            let cfg = ConfidenceConfig {
                window_size,
                bottom_fraction,
                metric,
            };
            let scores = corpus
                .problems
                .par_iter()
                .flat_map_iter(|p| p.samples.iter().map(|s| s.score(&cfg)))
                .collect::<Result<Vec<f64>>>()?;
            Ok((metric, auroc(&scores, &labels)?))
        })
        .collect()
}

/// Fixed settings shared by every sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBase {
    pub mode: CalibrationMode,
    pub params: EvidenceParams,
    pub confidence: ConfidenceConfig,
    pub p_target: f64,
    pub calibration_size: usize,
}

impl Default for SweepBase {
    fn default() -> Self {
        Self {
            mode: CalibrationMode::Offline,
            params: EvidenceParams::default(),
            confidence: ConfidenceConfig::default(),
            p_target: DEFAULT_P_TARGET,
            calibration_size: DEFAULT_CALIBRATION_SIZE,
        }
    }
}

/// Values to sweep; an empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub p_target: Vec<f64>,
    pub lambda: Vec<f64>,
    pub c_threshold: Vec<f64>,
    pub window_size: Vec<usize>,
    pub calibration_size: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub p_target: f64,
    pub lambda: f64,
    pub c_threshold: f64,
    pub window_size: usize,
    pub calibration_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: GridPoint,
    pub report: RunReport,
}

fn axis<T: Copy>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

impl SweepGrid {
    /// Cartesian product in fixed order (p_target outermost, calibration size innermost).
    pub fn points(&self, base: &SweepBase) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &p_target in &axis(&self.p_target, base.p_target) {
            for &lambda in &axis(&self.lambda, base.params.lambda) {
                for &c_threshold in &axis(&self.c_threshold, base.params.c_threshold) {
                    for &window_size in &axis(&self.window_size, base.confidence.window_size) {
                        for &calibration_size in
                            &axis(&self.calibration_size, base.calibration_size)
                        {
                            out.push(GridPoint {
                                p_target,
                                lambda,
                                c_threshold,
                                window_size,
                                calibration_size,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Calibrates on `calibration` and evaluates the two-stage controller on
/// `evaluation` at every grid point.
pub fn sweep(
    calibration: &TraceCorpus,
    evaluation: &TraceCorpus,
    base: &SweepBase,
    grid: &SweepGrid,
    cost: &CostModel,
) -> Result<Vec<SweepRow>> {
    grid.points(base)
        .into_iter()
        .map(|point| {
            let confidence = ConfidenceConfig {
                window_size: point.window_size,
                ..base.confidence
            };
            let params = EvidenceParams {
                lambda: point.lambda,
                c_threshold: point.c_threshold,
                ..base.params
            };
            let profile = calibrate_corpus(
                calibration,
                base.mode,
                point.calibration_size,
                point.p_target,
                &confidence,
            )?;
            let method = MethodSpec::Reasc {
                profile,
                params,
                confidence,
            };
            let report = evaluate(evaluation, &method, cost, None)?;
            Ok(SweepRow { point, report })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::SampleRecord;
    use crate::harness::trace::TraceProblem;

    fn problem(id: &str, gold: &str, answers: &[(&str, f64)], tokens: u64) -> TraceProblem {
        TraceProblem {
            problem_id: id.into(),
            gold: Some(gold.into()),
            samples: answers
                .iter()
                .map(|(a, c)| SampleRecord::with_confidence(*a, *c, tokens))
                .collect(),
        }
    }

    fn uniform_corpus() -> TraceCorpus {
        TraceCorpus::new(
            (0..5)
                .map(|i| problem(&format!("q{i}"), "7", &[("7", 1.0); 16], 100))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_sc_report() {
        let cost = CostModel::new(1_000_000_000).unwrap();
        let r = evaluate(&uniform_corpus(), &MethodSpec::sc(), &cost, None).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.mean_tflops, cost_tflops(16 * 100, &cost));
        assert_eq!(r.total_samples, 80);
        assert_eq!(r.mean_samples, 16.0);
        assert_eq!(r.acc_per_tf, 100.0 / r.mean_tflops);
        assert!(r.stage1_accept_ratio.is_none());
    }

    #[test]
    fn accept_all_gate_report() {
        let cost = CostModel::new(1_000_000_000).unwrap();
        let profile =
            CalibrationProfile::new(0.0, 1.0, f64::NEG_INFINITY, 0.9, CalibrationMode::Offline)
                .unwrap();
        let r = evaluate(&uniform_corpus(), &MethodSpec::reasc(profile), &cost, None).unwrap();
        assert_eq!(r.stage1_accept_ratio, Some(1.0));
        assert_eq!(r.stage1_accept_accuracy, Some(1.0));
        assert_eq!(r.mean_samples, 1.0);
    }

    #[test]
    fn missing_gold_is_an_error() {
        let mut corpus = uniform_corpus();
        corpus.problems[2].gold = None;
        let cost = CostModel::new(1).unwrap();
        assert!(matches!(
            evaluate(&corpus, &MethodSpec::sc(), &cost, None),
            Err(Error::MissingLabel(id)) if id == "q2"
        ));
    }

    #[test]
    fn gold_is_compared_canonically() {
        let corpus = TraceCorpus::new(vec![problem("a", " 7.0 ", &[("7", 1.0); 16], 1)]).unwrap();
        let cost = CostModel::new(1).unwrap();
        assert_eq!(
            evaluate(&corpus, &MethodSpec::sc(), &cost, None)
                .unwrap()
                .accuracy,
            1.0
        );
    }

    #[test]
    fn calibration_slice_counts_first_samples_only() {
        let corpus = uniform_corpus();
        let (items, tokens) = calibration_slice(&corpus, 3, &ConfidenceConfig::default()).unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(tokens, 300);
        assert!(items.iter().all(|(s, c)| *s == 1.0 && *c == Some(true)));
    }

    #[test]
    fn offline_calibration_needs_labels() {
        let mut corpus = uniform_corpus();
        corpus.problems[0].gold = None;
        assert!(matches!(
            calibrate_corpus(
                &corpus,
                CalibrationMode::Offline,
                5,
                0.9,
                &ConfidenceConfig::default()
            ),
            Err(Error::MissingLabel(_))
        ));
        assert!(calibrate_corpus(
            &corpus,
            CalibrationMode::Online,
            5,
            0.9,
            &ConfidenceConfig::default()
        )
        .is_ok());
    }

    #[test]
    fn grid_order_and_defaults() {
        let base = SweepBase::default();
        let grid = SweepGrid {
            lambda: vec![0.0, 0.7],
            c_threshold: vec![0.9, 0.95],
            ..SweepGrid::default()
        };
        let pts = grid.points(&base);
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[0].lambda, pts[0].c_threshold), (0.0, 0.9));
        assert_eq!((pts[1].lambda, pts[1].c_threshold), (0.0, 0.95));
        assert_eq!((pts[3].lambda, pts[3].c_threshold), (0.7, 0.95));
        assert!(pts
            .iter()
            .all(|p| p.p_target == 0.9 && p.window_size == 128));
        assert_eq!(SweepGrid::default().points(&base).len(), 1);
    }
}
