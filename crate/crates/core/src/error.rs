//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by confidence scoring, the evidence engine, calibration,
/// the controllers and the evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("evidence weight must be finite and > 0, got {0}")]
    InvalidWeight(f64),

    #[error("no evidence has been accumulated")]
    NoEvidence,

    #[error("invalid calibration profile: {0}")]
    InvalidProfile(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid mixture fit: {0}")]
    InvalidFit(String),

    #[error("sample source exhausted after {drawn} samples")]
    SourceExhausted { drawn: usize },

    #[error("problem `{0}` has no gold label")]
    MissingLabel(String),

    #[error("AUROC needs at least one positive and one negative label")]
    DegenerateLabels,

    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
