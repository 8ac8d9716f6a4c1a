use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use reasc_core::calibration::{CalibrationMode, DEFAULT_CALIBRATION_SIZE, DEFAULT_P_TARGET};
use reasc_core::confidence::{
    ConfidenceConfig, ConfidenceMetric, DEFAULT_BOTTOM_FRACTION, DEFAULT_WINDOW_SIZE,
};
use reasc_core::controllers::DEFAULT_ESC_WINDOW;
use reasc_core::evidence::{
    EvidenceParams, WeightMapping, DEFAULT_C_THRESHOLD, DEFAULT_LAMBDA, DEFAULT_MAX_BUDGET,
};
use reasc_core::harness::DEFAULT_N_RESAMPLES;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_N_PARAMS: u64 = 8_000_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "reasc",
    version,
    about = "Confidence-gated adaptive self-consistency: synthesize traces, calibrate, run and compare stopping rules"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic trace corpus (JSON Lines).
    Synth(SynthArgs),
    /// Fit a gating profile from the first response of each calibration problem.
    Calibrate(CalibrateArgs),
    /// Evaluate one method on a corpus.
    Run(RunArgs),
    /// Evaluate sc, esc, asc and reasc on the same replay order.
    Compare(CompareArgs),
    /// Evaluate reasc over a parameter grid.
    Sweep(SweepArgs),
    /// AUROC of every confidence metric for per-sample correctness.
    Auroc(AurocArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed (synthetic data, bootstrap resampling)
    #[arg(long, env = "REASC_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output corpus path
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n_problems: usize,
    #[arg(long, default_value_t = 16)]
    pub samples_per_problem: usize,
    /// Distinct wrong answers per problem
    #[arg(long, default_value_t = 4)]
    pub n_distractors: usize,
    /// Probability q that a sample is correct
    #[arg(long, default_value_t = 0.7)]
    pub prob_correct: f64,
    #[arg(long, default_value_t = 6.0)]
    pub conf_mean_correct: f64,
    #[arg(long, default_value_t = 3.0)]
    pub conf_mean_incorrect: f64,
    #[arg(long, default_value_t = 1.0)]
    pub conf_std: f64,
    #[arg(long, default_value_t = 200)]
    pub tokens_min: u64,
    #[arg(long, default_value_t = 600)]
    pub tokens_max: u64,
    /// Emit per-token certainty series instead of precomputed confidences
    #[arg(long)]
    pub token_level: bool,
    /// Per-token fluctuation (token-level only)
    #[arg(long, default_value_t = 1.0)]
    pub token_noise: f64,
    /// Depth of the low-certainty dip planted in incorrect responses
    #[arg(long, default_value_t = 3.0)]
    pub dip_depth: f64,
    /// Dip length in tokens
    #[arg(long, default_value_t = 64)]
    pub dip_length: usize,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Args)]
pub struct ConfidenceArgs {
    /// Response confidence metric
    #[arg(long, default_value_t = ConfidenceMetric::BottomFractionGroup)]
    pub metric: ConfidenceMetric,
    /// Sliding-window size in tokens for group confidence
    #[arg(long, default_value_t = DEFAULT_WINDOW_SIZE)]
    pub window_size: usize,
    /// Fraction of lowest windows averaged by bottom_fraction_group
    #[arg(long, default_value_t = DEFAULT_BOTTOM_FRACTION)]
    pub bottom_fraction: f64,
}

impl ConfidenceArgs {
    pub fn config(&self) -> ConfidenceConfig {
        ConfidenceConfig {
            window_size: self.window_size,
            bottom_fraction: self.bottom_fraction,
            metric: self.metric,
        }
    }
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Trace corpus (JSON Lines)
    #[arg(short, long)]
    pub input: PathBuf,
    /// Skip this many leading problems (e.g. a calibration slice)
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    /// Use at most this many problems after skipping
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output profile path (JSON)
    #[arg(short, long)]
    pub output: PathBuf,
    /// offline needs gold labels; online fits a two-component mixture
    #[arg(long, default_value_t = CalibrationMode::Offline)]
    pub mode: CalibrationMode,
    /// Number of problems whose first response is used
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_SIZE)]
    pub calibration_size: usize,
    /// Target accuracy of accepted single responses
    #[arg(long, default_value_t = DEFAULT_P_TARGET)]
    pub p_target: f64,
    #[command(flatten)]
    pub confidence: ConfidenceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvidenceArgs {
    /// Confidence sharpness of the evidence weight
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Confidence-to-weight mapping
    #[arg(long, default_value_t = WeightMapping::BoundedExponential)]
    pub mapping: WeightMapping,
    /// Dominance probability required to stop
    #[arg(long, default_value_t = DEFAULT_C_THRESHOLD)]
    pub c_threshold: f64,
    /// Maximum samples per problem (also the fixed sc budget)
    #[arg(long, default_value_t = DEFAULT_MAX_BUDGET)]
    pub max_budget: usize,
}

impl EvidenceArgs {
    pub fn params(&self) -> EvidenceParams {
        EvidenceParams {
            lambda: self.lambda,
            mapping: self.mapping,
            c_threshold: self.c_threshold,
            max_budget: self.max_budget,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Model parameter count for cost accounting (2N FLOPs per token)
    #[arg(long, default_value_t = DEFAULT_N_PARAMS)]
    pub n_params: u64,
    /// Bootstrap resamples for the accuracy interval (0 disables it)
    #[arg(long, default_value_t = DEFAULT_N_RESAMPLES)]
    pub n_resamples: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Report path (JSON array)
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Optional CSV report path
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Sc,
    Esc,
    Asc,
    Reasc,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(short, long, value_enum)]
    pub method: Method,
    /// Calibration profile (required for reasc)
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[command(flatten)]
    pub evidence: EvidenceArgs,
    /// Window size of early-stopping self-consistency
    #[arg(long, default_value_t = DEFAULT_ESC_WINDOW)]
    pub esc_window: usize,
    #[command(flatten)]
    pub confidence: ConfidenceArgs,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Calibration profile for reasc
    #[arg(long)]
    pub profile: PathBuf,
    #[command(flatten)]
    pub evidence: EvidenceArgs,
    /// Window size of early-stopping self-consistency
    #[arg(long, default_value_t = DEFAULT_ESC_WINDOW)]
    pub esc_window: usize,
    #[command(flatten)]
    pub confidence: ConfidenceArgs,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Evaluation corpus; the first --skip problems are left out
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Calibration corpus (defaults to the evaluation input file)
    #[arg(long)]
    pub calibration_input: Option<PathBuf>,
    /// Calibration mode: offline needs gold labels, online fits a mixture
    #[arg(long, default_value_t = CalibrationMode::Offline)]
    pub mode: CalibrationMode,
    /// Problems in the calibration slice
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_SIZE)]
    pub calibration_size: usize,
    /// Target Stage-1 accuracy for the offline gate
    #[arg(long, default_value_t = DEFAULT_P_TARGET)]
    pub p_target: f64,
    /// Grid values for p_target (comma separated; an omitted axis uses the single flag value)
    #[arg(long, value_delimiter = ',')]
    pub grid_p_target: Vec<f64>,
    /// Grid values for lambda
    #[arg(long, value_delimiter = ',')]
    pub grid_lambda: Vec<f64>,
    /// Grid values for c_threshold
    #[arg(long, value_delimiter = ',')]
    pub grid_c_threshold: Vec<f64>,
    /// Grid values for window_size
    #[arg(long, value_delimiter = ',')]
    pub grid_window_size: Vec<usize>,
    /// Grid values for calibration_size
    #[arg(long, value_delimiter = ',')]
    pub grid_calibration_size: Vec<usize>,
    #[command(flatten)]
    pub evidence: EvidenceArgs,
    #[command(flatten)]
    pub confidence: ConfidenceArgs,
    /// Model parameter count for cost accounting (2N FLOPs per token)
    #[arg(long, default_value_t = DEFAULT_N_PARAMS)]
    pub n_params: u64,
    /// Report path (JSON array of grid rows)
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Optional CSV report path
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AurocArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value_t = DEFAULT_WINDOW_SIZE)]
    pub window_size: usize,
    #[arg(long, default_value_t = DEFAULT_BOTTOM_FRACTION)]
    pub bottom_fraction: f64,
    /// Optional JSON output
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
