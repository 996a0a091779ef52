//! Persisted run records: the structured-text artifact a `simulate` or
//! `verify` invocation writes, versioned by the shared `schema` field.
//!
//! A record carries everything needed to reproduce the run: the full
//! configuration echo (seed included), a digest per replica trajectory, and
//! for suite runs the canonical verdict text. Wall-clock runtime is recorded
//! for the reader but is no part of the reproducibility contract.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use brw_core::brw::TrajectorySummary;
use brw_core::report::{self, SCHEMA_VERSION};

const VERDICT_MARKER: &str = "[verdict]";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Suite,
    Simulation,
}

impl RecordKind {
    fn as_str(self) -> &'static str {
        match self {
            RecordKind::Suite => "suite",
            RecordKind::Simulation => "simulation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub kind: RecordKind,
    /// Configuration echo in configuration-file grammar.
    pub config: String,
    pub runtime_millis: u128,
    /// One hex digest per replica trajectory, in replica order.
    pub replica_digests: Vec<String>,
    /// Canonical verdict text (suite runs only).
    pub verdict: Option<String>,
}

impl RunRecord {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "schema = {SCHEMA_VERSION}");
        let _ = writeln!(out, "record.kind = {}", self.kind.as_str());
        let _ = writeln!(out, "record.runtime_ms = {}", self.runtime_millis);
        out.push_str(&self.config);
        let _ = writeln!(out, "digest.count = {}", self.replica_digests.len());
        for (i, digest) in self.replica_digests.iter().enumerate() {
            let _ = writeln!(out, "digest.{i} = {digest}");
        }
        if let Some(verdict) = &self.verdict {
            let _ = writeln!(out, "{VERDICT_MARKER}");
            out.push_str(verdict);
        }
        out
    }

    pub fn parse(text: &str) -> Result<RunRecord> {
        let marker = format!("\n{VERDICT_MARKER}\n");
        let (head, verdict) = match text.split_once(&marker) {
            Some((head, verdict)) => (head, Some(verdict.to_string())),
            None => (text, None),
        };
        let mut lines = head.lines();
        let schema = lines.next().context("empty record")?;
        let expected = format!("schema = {SCHEMA_VERSION}");
        if schema != expected {
            bail!("unsupported record schema: got `{schema}`, want `{expected}`");
        }
        let kind = match field(lines.next(), "record.kind")? {
            "suite" => RecordKind::Suite,
            "simulation" => RecordKind::Simulation,
            other => bail!("unknown record.kind `{other}`"),
        };
        let runtime_millis = field(lines.next(), "record.runtime_ms")?
            .parse()
            .context("record.runtime_ms is not an integer")?;
        let mut config = String::new();
        let mut digest_count: Option<usize> = None;
        for line in lines.by_ref() {
            if let Some(rest) = line.strip_prefix("digest.count = ") {
                digest_count = Some(rest.parse().context("digest.count is not an integer")?);
                break;
            }
            config.push_str(line);
            config.push('\n');
        }
        let count = digest_count.context("record has no digest.count line")?;
        let mut replica_digests = Vec::with_capacity(count);
        for i in 0..count {
            let value = field(lines.next(), &format!("digest.{i}"))?;
            replica_digests.push(value.to_string());
        }
        Ok(RunRecord {
            kind,
            config,
            runtime_millis,
            replica_digests,
            verdict,
        })
    }
}

fn field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.with_context(|| format!("record ends before `{key}`"))?;
    let prefix = format!("{key} = ");
    line.strip_prefix(&prefix)
        .with_context(|| format!("expected `{key} = ...`, got `{line}`"))
}

/// Digest of one replica trajectory: SHA-256 over its CSV rows. The rows are
/// rendered for this replica alone (header dropped), so the digest depends
/// only on the trajectory, not on its position in the batch.
pub fn replica_digest(summary: &TrajectorySummary) -> String {
    let csv = report::render_summaries_csv(std::slice::from_ref(summary))
        .expect("a single summary always renders");
    let body = csv.split_once('\n').map(|(_, body)| body).unwrap_or("");
    let mut hasher = Sha256::new();
    hasher.update(body.as_bytes());
    hex::encode(hasher.finalize())
}
