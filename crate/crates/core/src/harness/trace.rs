//! JSON-Lines trace corpora.
//!
//! One problem per line:
//!
//! ```text
//! {"problem_id": "p00001", "gold": "42", "samples": [
//!     {"answer": "42", "confidence": 3.1, "token_certainties": null, "num_tokens": 311}, ...]}
//! ```
//!
//! Unknown fields are ignored. Each sample needs `confidence` or
//! `token_certainties`.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::controllers::SampleRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceProblem {
    pub problem_id: String,
    #[serde(default)]
    pub gold: Option<String>,
    pub samples: Vec<SampleRecord>,
}

impl TraceProblem {
    fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidInput(format!(
                "problem `{}` has no samples",
                self.problem_id
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            s.validate().map_err(|e| {
                Error::InvalidInput(format!("problem `{}` sample {i}: {e}", self.problem_id))
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceCorpus {
    pub problems: Vec<TraceProblem>,
}

impl TraceCorpus {
    pub fn new(problems: Vec<TraceProblem>) -> Result<Self> {
        let corpus = Self { problems };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.problems.len());
        for p in &self.problems {
            if !seen.insert(p.problem_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate problem_id `{}`",
                    p.problem_id
                )));
            }
            p.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn num_samples(&self) -> usize {
        self.problems.iter().map(|p| p.samples.len()).sum()
    }

    pub fn has_all_labels(&self) -> bool {
        self.problems.iter().all(|p| p.gold.is_some())
    }

    /// Problems `[start, start + len)` as a new corpus (clamped to the end).
    pub fn slice(&self, start: usize, len: usize) -> TraceCorpus {
        let start = start.min(self.problems.len());
        let end = start.saturating_add(len).min(self.problems.len());
        TraceCorpus {
            problems: self.problems[start..end].to_vec(),
        }
    }

    /// Parses a JSON-Lines corpus. Blank lines are skipped.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut problems = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let problem: TraceProblem = serde_json::from_str(&line).map_err(|e| Error::Trace {
                line: idx + 1,
                message: e.to_string(),
            })?;
            problem.validate().map_err(|e| Error::Trace {
                line: idx + 1,
                message: e.to_string(),
            })?;
            problems.push(problem);
        }
        let corpus = Self { problems };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for p in &self.problems {
            serde_json::to_writer(&mut writer, p)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_path(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"problem_id":"p1","gold":"4","samples":[{"answer":"4","confidence":2.5,"token_certainties":null,"num_tokens":10}],"extra":"ignored"}

{"problem_id":"p2","gold":null,"samples":[{"answer":"x","token_certainties":[1.0,2.0],"num_tokens":2,"logprobs":[]}]}
"#;

    #[test]
    fn parses_and_round_trips() {
        let corpus = TraceCorpus::read_jsonl(SAMPLE.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.num_samples(), 2);
        assert!(!corpus.has_all_labels());
        assert_eq!(corpus.problems[0].samples[0].confidence, Some(2.5));
        assert_eq!(
            corpus.problems[1].samples[0]
                .token_certainties
                .as_ref()
                .unwrap()
                .values(),
            &[1.0, 2.0]
        );

        let mut buf = Vec::new();
        corpus.write_jsonl(&mut buf).unwrap();
        let again = TraceCorpus::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(again, corpus);
    }

    #[test]
    fn rejects_bad_lines() {
        let dup = r#"{"problem_id":"a","gold":"1","samples":[{"answer":"1","confidence":1.0,"num_tokens":1}]}
{"problem_id":"a","gold":"1","samples":[{"answer":"1","confidence":1.0,"num_tokens":1}]}"#;
        assert!(TraceCorpus::read_jsonl(dup.as_bytes()).is_err());

        let no_conf = r#"{"problem_id":"a","samples":[{"answer":"1","num_tokens":1}]}"#;
        assert!(matches!(
            TraceCorpus::read_jsonl(no_conf.as_bytes()),
            Err(Error::Trace { line: 1, .. })
        ));

        let empty = r#"{"problem_id":"a","samples":[]}"#;
        assert!(TraceCorpus::read_jsonl(empty.as_bytes()).is_err());

        let negative = r#"{"problem_id":"a","samples":[{"answer":"1","token_certainties":[-1.0],"num_tokens":1}]}"#;
        assert!(TraceCorpus::read_jsonl(negative.as_bytes()).is_err());

        let garbage = "not json\n";
        assert!(matches!(
            TraceCorpus::read_jsonl(garbage.as_bytes()),
            Err(Error::Trace { line: 1, .. })
        ));
    }

    #[test]
    fn slicing_clamps() {
        let corpus = TraceCorpus::read_jsonl(SAMPLE.as_bytes()).unwrap();
        assert_eq!(corpus.slice(1, 10).len(), 1);
        assert_eq!(corpus.slice(5, 10).len(), 0);
        assert_eq!(corpus.slice(0, 1).problems[0].problem_id, "p1");
    }
}
