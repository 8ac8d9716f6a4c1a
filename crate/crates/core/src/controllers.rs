//! Per-problem sampling controllers.
//!
//! Every controller pulls responses from a [`SampleSource`] in its fixed
//! replay order and returns a [`Decision`]:
//!
//! * [`run_sc`]: fixed budget, plurality vote.
//! * [`run_esc`]: tiles of `w` samples, stop on the first unanimous tile.
//! * [`run_asc`]: unit-weight Beta dominance stopping.
//! * [`run_reasc`]: single-sample confidence gate, then confidence-weighted
//!   Beta dominance stopping.

use serde::{Deserialize, Serialize};

use crate::answer::canonicalize;
use crate::calibration::CalibrationProfile;
use crate::confidence::{confidence_score, ConfidenceConfig, TokenCertaintySeries};
use crate::error::{Error, Result};
use crate::evidence::{evidence_weight, EvidenceLedger, EvidenceParams};

pub const DEFAULT_SC_BUDGET: usize = 16;
pub const DEFAULT_ESC_WINDOW: usize = 4;

/// One recorded model response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub answer: String,
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub token_certainties: Option<TokenCertaintySeries>,
    pub num_tokens: u64,
}

impl SampleRecord {
    pub fn with_confidence(answer: impl Into<String>, confidence: f64, num_tokens: u64) -> Self {
        Self {
            answer: answer.into(),
            confidence: Some(confidence),
            token_certainties: None,
            num_tokens,
        }
    }

    pub fn with_tokens(answer: impl Into<String>, series: TokenCertaintySeries) -> Self {
        let num_tokens = series.len() as u64;
        Self {
            answer: answer.into(),
            confidence: None,
            token_certainties: Some(series),
            num_tokens,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tokens == 0 {
            return Err(Error::InvalidInput("num_tokens must be >= 1".into()));
        }
        match (&self.confidence, &self.token_certainties) {
            (None, None) => Err(Error::InvalidInput(
                "sample needs `confidence` or `token_certainties`".into(),
            )),
            (Some(c), _) if !c.is_finite() => Err(Error::InvalidInput(format!(
                "confidence must be finite, got {c}"
            ))),
            _ => Ok(()),
        }
    }

    /// Response score: computed from the token series under `config` when one
    /// is recorded, otherwise the precomputed confidence.
    pub fn score(&self, config: &ConfidenceConfig) -> Result<f64> {
        match (&self.token_certainties, self.confidence) {
            (Some(series), _) => confidence_score(series, config),
            (None, Some(c)) => Ok(c),
            (None, None) => Err(Error::InvalidInput(
                "sample needs `confidence` or `token_certainties`".into(),
            )),
        }
    }
}

/// Supplies a problem's responses in a fixed order.
pub trait SampleSource {
    /// Next response, or `None` once the source is exhausted.
    fn next_sample(&mut self) -> Option<&SampleRecord>;
}

/// Replays a recorded slice of responses from the front.
#[derive(Debug, Clone)]
pub struct ReplaySource<'a> {
    samples: &'a [SampleRecord],
    position: usize,
}

impl<'a> ReplaySource<'a> {
    pub fn new(samples: &'a [SampleRecord]) -> Self {
        Self {
            samples,
            position: 0,
        }
    }

    pub fn consumed(&self) -> usize {
        self.position
    }
}

impl SampleSource for ReplaySource<'_> {
    fn next_sample(&mut self) -> Option<&SampleRecord> {
        let record = self.samples.get(self.position)?;
        self.position += 1;
        Some(record)
    }
}

/// Where a controller settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Accepted from the first response.
    Gate,
    /// Stopping rule fired before the budget ran out.
    Accumulate,
    /// Budget reached.
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub answer: String,
    pub samples_used: usize,
    pub tokens_used: u64,
    pub resolved_at_stage: Stage,
    pub stop_probability: Option<f64>,
}

struct Drawn {
    answer: String,
    tokens: u64,
    score: Option<f64>,
}

fn draw<S: SampleSource + ?Sized>(
    source: &mut S,
    drawn_so_far: usize,
    score_with: Option<&ConfidenceConfig>,
) -> Result<Drawn> {
    let record = source.next_sample().ok_or(Error::SourceExhausted {
        drawn: drawn_so_far,
    })?;
    let score = score_with.map(|cfg| record.score(cfg)).transpose()?;
    Ok(Drawn {
        answer: canonicalize(&record.answer),
        tokens: record.num_tokens,
        score,
    })
}

/// Runs the dominance loop on a ledger that already holds its first sample.
fn accumulate<S, W>(
    source: &mut S,
    mut ledger: EvidenceLedger,
    mut tokens: u64,
    params: &EvidenceParams,
    score_with: Option<&ConfidenceConfig>,
    weight_of: W,
) -> Result<Decision>
where
    S: SampleSource + ?Sized,
    W: Fn(Option<f64>) -> Result<f64>,
{
    loop {
        let count = ledger.sample_count();
        let p = ledger.dominance_probability();
        if count >= 2 && p >= params.c_threshold {
            return Ok(Decision {
                answer: ledger.select_answer()?.to_owned(),
                samples_used: count,
                tokens_used: tokens,
                resolved_at_stage: Stage::Accumulate,
                stop_probability: Some(p),
            });
        }
        if count >= params.max_budget {
            return Ok(Decision {
                answer: ledger.select_answer()?.to_owned(),
                samples_used: count,
                tokens_used: tokens,
                resolved_at_stage: Stage::Budget,
                stop_probability: Some(p),
            });
        }
        let next = draw(source, count, score_with)?;
        tokens += next.tokens;
        ledger.add_sample(&next.answer, weight_of(next.score)?)?;
    }
}

/// Two-stage controller: confidence gate on the first response, then
/// confidence-weighted dominance stopping.
///
/// The gated response is reused as the first accumulated sample when the
/// gate does not accept it.
pub fn run_reasc<S: SampleSource + ?Sized>(
    source: &mut S,
    profile: &CalibrationProfile,
    params: &EvidenceParams,
    confidence: &ConfidenceConfig,
) -> Result<Decision> {
    params.validate()?;
    profile.validate()?;
    confidence.validate()?;

    let first = draw(source, 0, Some(confidence))?;
    let score = first.score.expect("scored draw");
    if score >= profile.tau_gate {
        return Ok(Decision {
            answer: first.answer,
            samples_used: 1,
            tokens_used: first.tokens,
            resolved_at_stage: Stage::Gate,
            stop_probability: None,
        });
    }

    let weight_of = |s: Option<f64>| evidence_weight(s.expect("scored draw"), profile, params);
    let mut ledger = EvidenceLedger::new();
    ledger.add_sample(&first.answer, weight_of(Some(score))?)?;
    accumulate(
        source,
        ledger,
        first.tokens,
        params,
        Some(confidence),
        weight_of,
    )
}

/// Count-based dominance stopping with unit weights and no gate.
pub fn run_asc<S: SampleSource + ?Sized>(
    source: &mut S,
    c_threshold: f64,
    max_k: usize,
) -> Result<Decision> {
    let params = EvidenceParams::count_based(c_threshold, max_k);
    params.validate()?;
    let first = draw(source, 0, None)?;
    let mut ledger = EvidenceLedger::new();
    ledger.add_sample(&first.answer, 1.0)?;
    accumulate(source, ledger, first.tokens, &params, None, |_| Ok(1.0))
}

/// Fixed-budget plurality vote over exactly `k` responses.
pub fn run_sc<S: SampleSource + ?Sized>(source: &mut S, k: usize) -> Result<Decision> {
    if k == 0 {
        return Err(Error::InvalidConfig("SC budget must be >= 1".into()));
    }
    let mut ledger = EvidenceLedger::new();
    let mut tokens = 0;
    for drawn in 0..k {
        let next = draw(source, drawn, None)?;
        tokens += next.tokens;
        ledger.add_sample(&next.answer, 1.0)?;
    }
    Ok(Decision {
        answer: ledger.select_answer()?.to_owned(),
        samples_used: k,
        tokens_used: tokens,
        resolved_at_stage: Stage::Budget,
        stop_probability: None,
    })
}

/// Window-unanimity early stopping over disjoint tiles of `window` responses.
pub fn run_esc<S: SampleSource + ?Sized>(
    source: &mut S,
    window: usize,
    max_k: usize,
) -> Result<Decision> {
    if window == 0 || max_k == 0 || !max_k.is_multiple_of(window) {
        return Err(Error::InvalidConfig(format!(
            "ESC budget {max_k} must be a positive multiple of the window {window}"
        )));
    }
    let mut ledger = EvidenceLedger::new();
    let mut tokens = 0;
    let mut tile = Vec::with_capacity(window);
    while ledger.sample_count() < max_k {
        tile.clear();
        for _ in 0..window {
            let next = draw(source, ledger.sample_count(), None)?;
            tokens += next.tokens;
            ledger.add_sample(&next.answer, 1.0)?;
            tile.push(next.answer);
        }
        if tile.iter().all(|a| *a == tile[0]) {
            return Ok(Decision {
                answer: tile.swap_remove(0),
                samples_used: ledger.sample_count(),
                tokens_used: tokens,
                resolved_at_stage: Stage::Accumulate,
                stop_probability: None,
            });
        }
    }
    Ok(Decision {
        answer: ledger.select_answer()?.to_owned(),
        samples_used: ledger.sample_count(),
        tokens_used: tokens,
        resolved_at_stage: Stage::Budget,
        stop_probability: None,
    })
}
