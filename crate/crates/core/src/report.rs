//! Canonical text rendering of verdicts and CSV evidence.
//!
//! Rendering is deterministic: the same verdict produces the same bytes, and
//! wall-clock runtime is deliberately excluded, so a suite rerun with the
//! same configuration and seed compares byte-identical. The configuration
//! echo uses the same `key = value` grammar that configuration files use.

use std::fmt::Write as _;

use crate::brw::{OffspringSpec, TrajectorySummary};
use crate::chains::ChainKind;
use crate::error::{Error, Result};
use crate::experiments::{SuiteConfig, Verdict};

/// Version stamp of the rendered formats.
pub const SCHEMA_VERSION: u32 = 1;

/// Render a verdict as canonical text.
pub fn render_verdict(verdict: &Verdict) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema = {SCHEMA_VERSION}");
    out.push_str(&render_config(&verdict.config));
    for (i, a) in verdict.assertions.iter().enumerate() {
        let _ = writeln!(out, "assertion.{i}.name = {}", a.name);
        let _ = writeln!(out, "assertion.{i}.comparison = {}", a.comparison.as_str());
        let _ = writeln!(out, "assertion.{i}.observed = {}", a.observed);
        let _ = writeln!(out, "assertion.{i}.target = {}", a.target);
        let _ = writeln!(out, "assertion.{i}.tolerance = {}", a.tolerance);
        if let Some(se) = a.std_error {
            let _ = writeln!(out, "assertion.{i}.std_error = {se}");
        }
        let _ = writeln!(out, "assertion.{i}.provenance = {}", a.provenance.as_str());
        if let Some(surrogate) = &a.surrogate {
            let _ = writeln!(out, "assertion.{i}.surrogate = {surrogate}");
        }
        let _ = writeln!(out, "assertion.{i}.pass = {}", a.pass);
    }
    for (i, oracle) in verdict.oracles.iter().enumerate() {
        let _ = writeln!(out, "oracle.{i}.name = {}", oracle.name);
        let _ = writeln!(out, "oracle.{i}.value = {}", oracle.value);
        let _ = writeln!(out, "oracle.{i}.provenance = {}", oracle.provenance.as_str());
    }
    for (key, text) in &verdict.notes {
        let _ = writeln!(out, "note.{key} = {text}");
    }
    let _ = writeln!(out, "pass = {}", verdict.pass);
    out
}

/// Render a suite configuration in configuration-file grammar.
pub fn render_config(config: &SuiteConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "suite = {}", config.suite);
    out.push_str(&render_chain("chain", config.chain));
    out.push_str(&render_offspring("offspring", &config.offspring));
    if let Some(alt) = &config.offspring_alt {
        out.push_str(&render_offspring("offspring_alt", alt));
    }
    let _ = writeln!(out, "run.generations = {}", config.generations);
    let _ = writeln!(out, "run.replicas = {}", config.replicas);
    let _ = writeln!(out, "run.cylinder_depth = {}", config.cylinder_depth);
    let _ = writeln!(out, "run.seed = {}", config.seed);
    let _ = writeln!(out, "run.tolerance = {}", config.tolerance);
    out
}

/// Render one chain block in configuration-file grammar.
pub fn render_chain(section: &str, chain: ChainKind) -> String {
    let mut out = String::new();
    match chain {
        ChainKind::RegularTree { degree } => {
            let _ = writeln!(out, "{section}.kind = regular_tree");
            let _ = writeln!(out, "{section}.degree = {degree}");
        }
        ChainKind::DriftedLine { right_prob } => {
            let _ = writeln!(out, "{section}.kind = drifted_line");
            let _ = writeln!(out, "{section}.right_prob = {right_prob}");
        }
        ChainKind::Lattice3D => {
            let _ = writeln!(out, "{section}.kind = lattice3d");
        }
    }
    out
}

/// Render one offspring block in configuration-file grammar.
pub fn render_offspring(section: &str, spec: &OffspringSpec) -> String {
    let mut out = String::new();
    match spec {
        OffspringSpec::Deterministic { k } => {
            let _ = writeln!(out, "{section}.family = deterministic");
            let _ = writeln!(out, "{section}.k = {k}");
        }
        OffspringSpec::Binomial { n, p } => {
            let _ = writeln!(out, "{section}.family = binomial");
            let _ = writeln!(out, "{section}.n = {n}");
            let _ = writeln!(out, "{section}.p = {p}");
        }
        OffspringSpec::Poisson { lambda } => {
            let _ = writeln!(out, "{section}.family = poisson");
            let _ = writeln!(out, "{section}.lambda = {lambda}");
        }
        OffspringSpec::Geometric { p } => {
            let _ = writeln!(out, "{section}.family = geometric");
            let _ = writeln!(out, "{section}.p = {p}");
        }
        OffspringSpec::Table { pmf } => {
            let _ = writeln!(out, "{section}.family = table");
            let entries: Vec<String> = pmf.iter().map(|(v, p)| format!("{v}:{p}")).collect();
            let _ = writeln!(out, "{section}.pmf = {}", entries.join(","));
        }
    }
    out
}

/// Render a verdict's assertions as CSV (one row per assertion; the prose
/// surrogate fields stay in the text rendering).
pub fn render_assertions_csv(verdict: &Verdict) -> String {
    let mut out = String::from("name,comparison,observed,target,tolerance,std_error,provenance,pass\n");
    for a in &verdict.assertions {
        let std_error = a.std_error.map(|se| se.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            a.name,
            a.comparison.as_str(),
            a.observed,
            a.target,
            a.tolerance,
            std_error,
            a.provenance.as_str(),
            a.pass
        );
    }
    out
}

/// Render per-generation observations of a replica batch as CSV: one row per
/// `(replica, generation)`, with one column per cylinder label and per track
/// label. All summaries must share the same observation layout.
pub fn render_summaries_csv(summaries: &[TrajectorySummary]) -> Result<String> {
    let Some(first) = summaries.first() else {
        return Err(Error::Domain("no summaries to render".into()));
    };
    for s in summaries {
        if s.cylinder_labels != first.cylinder_labels || s.track_labels != first.track_labels {
            return Err(Error::Domain(
                "summaries have mismatched observation layouts".into(),
            ));
        }
    }
    let mut out = String::from("n,replica,total,w,root_occupied");
    for label in &first.cylinder_labels {
        let _ = write!(out, ",{label}");
    }
    for label in &first.track_labels {
        let _ = write!(out, ",mart_{label}");
    }
    out.push('\n');
    for (replica, s) in summaries.iter().enumerate() {
        for r in &s.records {
            let _ = write!(
                out,
                "{},{replica},{},{},{}",
                r.generation, r.population, r.normalized, r.root_occupied
            );
            for mass in &r.cylinder_masses {
                let _ = write!(out, ",{mass}");
            }
            for value in &r.track_values {
                let _ = write!(out, ",{value}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}
