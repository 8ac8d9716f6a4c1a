//! Trace corpora, synthetic data, metrics and evaluation drivers.

pub mod evaluate;
pub mod metrics;
pub mod synth;
pub mod trace;

pub use evaluate::{
    acc_per_tf, calibrate_corpus, calibration_slice, evaluate, evaluate_detailed, metric_aurocs,
    sweep, BootstrapOptions, CalibrationItems, Evaluation, GridPoint, MethodSpec, RunReport,
    SweepBase, SweepGrid, SweepRow,
};
pub use metrics::{
    auroc, bootstrap_ci, cost_tflops, percentile_sorted, CostModel, DEFAULT_N_RESAMPLES,
    DEFAULT_PERCENTILES,
};
pub use synth::{problem_id, problem_rng, synth_corpus, SynthConfig, TokenTraceConfig};
pub use trace::{TraceCorpus, TraceProblem};
