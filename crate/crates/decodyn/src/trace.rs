//! Canonical decoding-trace model and JSONL ingestion.
//!
//! A trace records, for every generated token, the decode step at which it was
//! finalized and the block it belongs to. Traces arrive either with a single
//! global step counter or with per-block counters; [`normalize_steps`] rewrites
//! the latter into the global form every metric expects.
//!
//! Wire format: UTF-8 text, one JSON object per line. Required keys per line:
//! `sample_id` (string), `step_scope` (`"global"` | `"per_block"`), `tokens`
//! (array of objects with `position`, `finalize_step` >= 1, `block_index` >= 0
//! and optional `text` / `label`). Optional keys: `domain_tag` (string),
//! `correct` (bool), `repetitive` (bool, default false). Unknown keys are
//! ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace {sample_id}: invalid {field}: {reason}")]
    Validation {
        sample_id: String,
        field: &'static str,
        reason: String,
    },
    #[error("duplicate sample_id {0:?} in corpus")]
    DuplicateSampleId(String),
}

/// How `finalize_step` values are numbered within a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScope {
    /// One counter for the whole sequence; steps strictly increase across blocks.
    Global,
    /// Each block restarts its own counter at 1.
    PerBlock,
}

/// Ground-truth status of a sample. External traces may lack labels, so
/// `Unknown` is a first-class bucket rather than a silent default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correctness {
    Correct,
    Incorrect,
    Unknown,
}

impl fmt::Display for Correctness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correctness::Correct => write!(f, "correct"),
            Correctness::Incorrect => write!(f, "incorrect"),
            Correctness::Unknown => write!(f, "unknown"),
        }
    }
}

/// One generated token: where it sits, when it was finalized, which block it
/// belongs to. `text` and `label` are optional so metrics run on anonymized
/// traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceToken {
    pub position: usize,
    pub text: Option<String>,
    pub label: Option<String>,
    pub finalize_step: u64,
    pub block_index: u32,
}

impl TraceToken {
    pub fn new(position: usize, finalize_step: u64, block_index: u32) -> Self {
        TraceToken {
            position,
            text: None,
            label: None,
            finalize_step,
            block_index,
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn with_text(mut self, text: &str) -> Self {
        self.text = Some(text.to_string());
        self
    }
}

/// A single decoding trace. Immutable after construction; the constructor
/// enforces every invariant, so downstream code can rely on:
///
/// - positions are exactly `0..n-1` in order, `n >= 1`;
/// - every `finalize_step >= 1`;
/// - `block_index` is non-decreasing in position;
/// - under [`StepScope::Global`], steps in a later block are strictly greater
///   than every step in any earlier block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodingTrace {
    sample_id: String,
    tokens: Vec<TraceToken>,
    domain_tag: Option<String>,
    correctness: Correctness,
    repetitive: bool,
    step_scope: StepScope,
}

impl DecodingTrace {
    pub fn new(
        sample_id: impl Into<String>,
        tokens: Vec<TraceToken>,
        step_scope: StepScope,
    ) -> Result<Self, TraceError> {
        let trace = DecodingTrace {
            sample_id: sample_id.into(),
            tokens,
            domain_tag: None,
            correctness: Correctness::Unknown,
            repetitive: false,
            step_scope,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn with_domain_tag(mut self, tag: impl Into<String>) -> Self {
        self.domain_tag = Some(tag.into());
        self
    }

    pub fn with_correctness(mut self, correctness: Correctness) -> Self {
        self.correctness = correctness;
        self
    }

    pub fn with_repetitive(mut self, repetitive: bool) -> Self {
        self.repetitive = repetitive;
        self
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn tokens(&self) -> &[TraceToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn domain_tag(&self) -> Option<&str> {
        self.domain_tag.as_deref()
    }

    pub fn correctness(&self) -> Correctness {
        self.correctness
    }

    pub fn repetitive(&self) -> bool {
        self.repetitive
    }

    pub fn step_scope(&self) -> StepScope {
        self.step_scope
    }

    /// Finalization steps in position order.
    pub fn steps(&self) -> Vec<u64> {
        self.tokens.iter().map(|t| t.finalize_step).collect()
    }

    /// Number of distinct blocks in the trace.
    pub fn block_count(&self) -> usize {
        let mut count = 0;
        let mut last = None;
        for t in &self.tokens {
            if last != Some(t.block_index) {
                count += 1;
                last = Some(t.block_index);
            }
        }
        count
    }

    fn validate(&self) -> Result<(), TraceError> {
        let err = |field: &'static str, reason: String| TraceError::Validation {
            sample_id: self.sample_id.clone(),
            field,
            reason,
        };
        if self.tokens.is_empty() {
            return Err(err("tokens", "trace must contain at least one token".into()));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.position != i {
                return Err(err(
                    "position",
                    format!("expected position {i} at index {i}, found {}", t.position),
                ));
            }
            if t.finalize_step == 0 {
                return Err(err(
                    "finalize_step",
                    format!("position {}: finalize_step must be >= 1", t.position),
                ));
            }
        }
        for pair in self.tokens.windows(2) {
            if pair[1].block_index < pair[0].block_index {
                return Err(err(
                    "block_index",
                    format!(
                        "block_index decreases from {} to {} at position {}",
                        pair[0].block_index, pair[1].block_index, pair[1].position
                    ),
                ));
            }
        }
        if self.step_scope == StepScope::Global {
            // Strict ordering across block boundaries: every step in block b
            // is below every step in block b+1.
            let mut max_so_far: Option<u64> = None;
            let mut current_block = self.tokens[0].block_index;
            let mut current_max = 0u64;
            let mut current_min = u64::MAX;
            for t in &self.tokens {
                if t.block_index != current_block {
                    max_so_far = Some(max_so_far.unwrap_or(0).max(current_max));
                    current_block = t.block_index;
                    current_max = 0;
                    current_min = u64::MAX;
                }
                current_max = current_max.max(t.finalize_step);
                current_min = current_min.min(t.finalize_step);
                if let Some(prev_max) = max_so_far {
                    if current_min <= prev_max {
                        return Err(err(
                            "finalize_step",
                            format!(
                                "global scope requires steps in block {} to exceed {} (step {} found)",
                                t.block_index, prev_max, t.finalize_step
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rewrite a per-block trace into the canonical global step scope.
///
/// Each block's local steps are offset by the cumulative maximum step of all
/// earlier blocks, which preserves within-block order exactly and makes the
/// cross-block ordering strict. Already-global traces pass through unchanged;
/// the operation is idempotent.
pub fn normalize_steps(trace: &DecodingTrace) -> Result<DecodingTrace, TraceError> {
    if trace.step_scope() == StepScope::Global {
        return Ok(trace.clone());
    }
    for t in trace.tokens() {
        if t.finalize_step == 0 {
            return Err(TraceError::Validation {
                sample_id: trace.sample_id().to_string(),
                field: "finalize_step",
                reason: format!("position {}: local step must be >= 1", t.position),
            });
        }
    }
    let mut tokens = trace.tokens().to_vec();
    let mut offset = 0u64;
    let mut i = 0;
    while i < tokens.len() {
        let block = tokens[i].block_index;
        let mut j = i;
        let mut local_max = 0u64;
        while j < tokens.len() && tokens[j].block_index == block {
            local_max = local_max.max(tokens[j].finalize_step);
            j += 1;
        }
        for t in &mut tokens[i..j] {
            t.finalize_step += offset;
        }
        offset += local_max;
        i = j;
    }
    let normalized = DecodingTrace {
        sample_id: trace.sample_id.clone(),
        tokens,
        domain_tag: trace.domain_tag.clone(),
        correctness: trace.correctness,
        repetitive: trace.repetitive,
        step_scope: StepScope::Global,
    };
    normalized.validate()?;
    Ok(normalized)
}

/// A set of traces with unique sample ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceCorpus {
    pub traces: Vec<DecodingTrace>,
    pub provenance: String,
}

impl TraceCorpus {
    pub fn new(traces: Vec<DecodingTrace>, provenance: impl Into<String>) -> Result<Self, TraceError> {
        let mut seen = BTreeSet::new();
        for t in &traces {
            if !seen.insert(t.sample_id().to_string()) {
                return Err(TraceError::DuplicateSampleId(t.sample_id().to_string()));
            }
        }
        Ok(TraceCorpus {
            traces,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Normalize every trace to the global step scope.
    pub fn normalized(&self) -> Result<TraceCorpus, TraceError> {
        let traces = self
            .traces
            .iter()
            .map(normalize_steps)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TraceCorpus {
            traces,
            provenance: self.provenance.clone(),
        })
    }
}

// Wire records. Kept separate from the domain types so that parsing and
// invariant validation stay distinct steps, and so serialization order is
// fixed by declaration order.

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize, Deserialize)]
struct TokenRecord {
    position: usize,
    finalize_step: u64,
    block_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    sample_id: String,
    step_scope: StepScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain_tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correct: Option<bool>,
    #[serde(default, skip_serializing_if = "is_false")]
    repetitive: bool,
    tokens: Vec<TokenRecord>,
}

impl From<&DecodingTrace> for TraceRecord {
    fn from(t: &DecodingTrace) -> Self {
        TraceRecord {
            sample_id: t.sample_id.clone(),
            step_scope: t.step_scope,
            domain_tag: t.domain_tag.clone(),
            correct: match t.correctness {
                Correctness::Correct => Some(true),
                Correctness::Incorrect => Some(false),
                Correctness::Unknown => None,
            },
            repetitive: t.repetitive,
            tokens: t
                .tokens
                .iter()
                .map(|tok| TokenRecord {
                    position: tok.position,
                    finalize_step: tok.finalize_step,
                    block_index: tok.block_index,
                    text: tok.text.clone(),
                    label: tok.label.clone(),
                })
                .collect(),
        }
    }
}

impl TraceRecord {
    fn into_trace(self) -> Result<DecodingTrace, TraceError> {
        let tokens = self
            .tokens
            .into_iter()
            .map(|r| TraceToken {
                position: r.position,
                text: r.text,
                label: r.label,
                finalize_step: r.finalize_step,
                block_index: r.block_index,
            })
            .collect();
        let trace = DecodingTrace {
            sample_id: self.sample_id,
            tokens,
            domain_tag: self.domain_tag,
            correctness: match self.correct {
                Some(true) => Correctness::Correct,
                Some(false) => Correctness::Incorrect,
                None => Correctness::Unknown,
            },
            repetitive: self.repetitive,
            step_scope: self.step_scope,
        };
        trace.validate()?;
        Ok(trace)
    }
}

/// Parse a JSONL corpus from text. Line numbers are 1-based in errors.
pub fn parse_corpus(text: &str, provenance: impl Into<String>) -> Result<TraceCorpus, TraceError> {
    let mut traces = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(line).map_err(|e| TraceError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        traces.push(record.into_trace()?);
    }
    TraceCorpus::new(traces, provenance)
}

/// Read a JSONL trace file.
pub fn ingest_traces(path: &Path) -> Result<TraceCorpus, TraceError> {
    let text = fs::read_to_string(path)?;
    parse_corpus(&text, path.display().to_string())
}

/// Serialize a corpus back to JSONL. `parse_corpus(emit_corpus(c))` is the
/// identity on any valid corpus.
pub fn emit_corpus(corpus: &TraceCorpus) -> String {
    let mut out = String::new();
    for trace in &corpus.traces {
        let record = TraceRecord::from(trace);
        out.push_str(&serde_json::to_string(&record).expect("trace serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Write a corpus as a JSONL file.
pub fn write_traces(path: &Path, corpus: &TraceCorpus) -> Result<(), TraceError> {
    fs::write(path, emit_corpus(corpus))?;
    Ok(())
}
