//! Deterministic run traces, one JSON object per line.
//!
//! Every record carries the tick it happened on, a short `kind` tag, the
//! component that produced it, and a structured detail object. Lines are
//! written in canonical form (sorted keys, compact separators), so two runs
//! that behave identically produce byte-identical trace files — which is
//! what makes replication checks as simple as comparing two strings.
//!
//! Floats are deliberately unsupported: every value that reaches a trace is
//! integral or textual, keeping the canonical encoding total.

use crate::canonical::canonical_string;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub tick: u64,
    pub kind: String,
    pub module: String,
    pub detail: serde_json::Value,
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {source}")]
    BadLine {
        line: usize,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Default)]
pub struct TraceLog {
    entries: Vec<TraceEntry>,
}

impl TraceLog {
    pub fn new() -> TraceLog {
        TraceLog::default()
    }

    pub fn record(
        &mut self,
        tick: u64,
        kind: impl Into<String>,
        module: impl Into<String>,
        detail: serde_json::Value,
    ) {
        self.entries.push(TraceEntry {
            tick,
            kind: kind.into(),
            module: module.into(),
            detail,
        });
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a TraceEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    /// One canonical JSON object per line, trailing newline included when
    /// the log is non-empty.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&canonical_string(entry));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<TraceLog, TraceParseError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(line)
                .map_err(|source| TraceParseError::BadLine { line: i + 1, source })?;
            entries.push(entry);
        }
        Ok(TraceLog { entries })
    }
}
