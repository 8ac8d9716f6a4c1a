//! Confidence-weighted adaptive self-consistency.
//!
//! A first response is accepted outright when its confidence clears a
//! calibrated gate; otherwise responses are sampled one at a time and
//! accumulated as confidence-weighted votes until the leading answer is
//! dominant with high probability or the budget runs out.

pub mod answer;
pub mod calibration;
pub mod confidence;
pub mod controllers;
pub mod error;
pub mod evidence;
pub mod harness;

pub use answer::canonicalize;
pub use calibration::{CalibrationMode, CalibrationProfile, Threshold};
pub use confidence::{ConfidenceConfig, ConfidenceMetric, TokenCertaintySeries};
pub use controllers::{Decision, ReplaySource, SampleRecord, SampleSource, Stage};
pub use error::{Error, Result};
pub use evidence::{EvidenceLedger, EvidenceParams, WeightMapping};
pub use harness::{CostModel, MethodSpec, RunReport, TraceCorpus, TraceProblem};
