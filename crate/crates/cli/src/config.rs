//! Configuration files and the settings they produce.
//!
//! Grammar: one `key = value` pair per line, `#` starts a comment, blank
//! lines are ignored, values may be double-quoted. Keys are flat and
//! sectioned: `chain.*`, `offspring.*`, `offspring_alt.*`, `run.*`,
//! `output.*`, plus the bare `suite` key. This is the same grammar the
//! verdict and record renderers emit, so any rendered configuration can be
//! fed back in unchanged.

use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;

use brw_core::brw::{OffspringSpec, MAX_CYLINDER_DEPTH};
use brw_core::chains::{ChainKind, ChainModel};
use brw_core::experiments::{SuiteConfig, DEFAULT_SEED};
use brw_core::report;

/// A parse or validation failure, naming the offending key and line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn at(entry: &Entry, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: Some(entry.line),
            key: entry.key.clone(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const KNOWN_KEYS: &[&str] = &[
    "suite",
    "chain.kind",
    "chain.degree",
    "chain.right_prob",
    "offspring.family",
    "offspring.k",
    "offspring.n",
    "offspring.p",
    "offspring.lambda",
    "offspring.pmf",
    "offspring_alt.family",
    "offspring_alt.k",
    "offspring_alt.n",
    "offspring_alt.p",
    "offspring_alt.lambda",
    "offspring_alt.pmf",
    "run.generations",
    "run.replicas",
    "run.cylinder_depth",
    "run.seed",
    "run.tolerance",
    "output.directory",
];

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

/// The keys a configuration file actually set, in file order.
#[derive(Debug, Clone, Default)]
pub struct ConfigPatch {
    entries: Vec<Entry>,
}

impl ConfigPatch {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn first_in_section(&self, section: &str) -> Option<&Entry> {
        let prefix = format!("{section}.");
        self.entries.iter().find(|e| e.key.starts_with(&prefix))
    }
}

/// Parse configuration text into a patch of explicitly-set keys.
pub fn parse_text(text: &str) -> Result<ConfigPatch, ConfigError> {
    let mut patch = ConfigPatch::default();
    for (index, raw_line) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError {
                line: Some(line),
                key: content.to_string(),
                message: "expected a `key = value` pair".into(),
            });
        };
        let key = key.trim().to_string();
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError {
                line: Some(line),
                key,
                message: "unknown key".into(),
            });
        }
        if let Some(previous) = patch.get(&key) {
            return Err(ConfigError {
                line: Some(line),
                key,
                message: format!("duplicate key (first set on line {})", previous.line),
            });
        }
        patch.entries.push(Entry {
            key,
            value: value.to_string(),
            line,
        });
    }
    Ok(patch)
}

fn parse_u32(entry: &Entry) -> Result<u32, ConfigError> {
    entry
        .value
        .parse()
        .map_err(|_| ConfigError::at(entry, format!("expected an integer, got `{}`", entry.value)))
}

fn parse_u64(entry: &Entry) -> Result<u64, ConfigError> {
    entry
        .value
        .parse()
        .map_err(|_| ConfigError::at(entry, format!("expected an integer, got `{}`", entry.value)))
}

fn parse_f64(entry: &Entry) -> Result<f64, ConfigError> {
    entry
        .value
        .parse()
        .map_err(|_| ConfigError::at(entry, format!("expected a number, got `{}`", entry.value)))
}

fn parse_pmf(entry: &Entry) -> Result<Vec<(u32, f64)>, ConfigError> {
    let mut pmf = Vec::new();
    for part in entry.value.split(',') {
        let Some((value, prob)) = part.split_once(':') else {
            return Err(ConfigError::at(
                entry,
                format!("expected `value:probability` entries, got `{part}`"),
            ));
        };
        let value = value.trim().parse().map_err(|_| {
            ConfigError::at(entry, format!("expected an integer offspring count, got `{value}`"))
        })?;
        let prob = prob.trim().parse().map_err(|_| {
            ConfigError::at(entry, format!("expected a probability, got `{prob}`"))
        })?;
        pmf.push((value, prob));
    }
    Ok(pmf)
}

fn chain_from(patch: &ConfigPatch) -> Result<Option<ChainKind>, ConfigError> {
    let Some(first) = patch.first_in_section("chain") else {
        return Ok(None);
    };
    let Some(kind) = patch.get("chain.kind") else {
        return Err(ConfigError {
            line: Some(first.line),
            key: "chain.kind".into(),
            message: "required whenever chain keys are set".into(),
        });
    };
    let reject = |key: &str, of: &str| -> Result<(), ConfigError> {
        match patch.get(key) {
            Some(entry) => Err(ConfigError::at(entry, format!("not a key of {of}"))),
            None => Ok(()),
        }
    };
    let (chain, blame) = match kind.value.as_str() {
        "regular_tree" => {
            reject("chain.right_prob", "regular_tree")?;
            let Some(degree) = patch.get("chain.degree") else {
                return Err(ConfigError {
                    line: Some(kind.line),
                    key: "chain.degree".into(),
                    message: "required for regular_tree".into(),
                });
            };
            (
                ChainKind::RegularTree {
                    degree: parse_u32(degree)?,
                },
                degree,
            )
        }
        "drifted_line" => {
            reject("chain.degree", "drifted_line")?;
            let Some(right_prob) = patch.get("chain.right_prob") else {
                return Err(ConfigError {
                    line: Some(kind.line),
                    key: "chain.right_prob".into(),
                    message: "required for drifted_line".into(),
                });
            };
            (
                ChainKind::DriftedLine {
                    right_prob: parse_f64(right_prob)?,
                },
                right_prob,
            )
        }
        "lattice3d" => {
            reject("chain.degree", "lattice3d")?;
            reject("chain.right_prob", "lattice3d")?;
            (ChainKind::Lattice3D, kind)
        }
        other => {
            return Err(ConfigError::at(
                kind,
                format!("expected regular_tree, drifted_line, or lattice3d, got `{other}`"),
            ));
        }
    };
    // Constraint checks (degree at least 3, right_prob in (1/2, 1)) live in
    // the chain constructors; surface them against the parameter's line.
    if let Err(e) = ChainModel::from_kind(chain) {
        return Err(ConfigError::at(blame, e.to_string()));
    }
    Ok(Some(chain))
}

fn offspring_from(
    patch: &ConfigPatch,
    section: &str,
) -> Result<Option<OffspringSpec>, ConfigError> {
    let Some(first) = patch.first_in_section(section) else {
        return Ok(None);
    };
    let family_key = format!("{section}.family");
    let Some(family) = patch.get(&family_key) else {
        return Err(ConfigError {
            line: Some(first.line),
            key: family_key,
            message: format!("required whenever {section} keys are set"),
        });
    };
    let required = |key: &str| -> Result<&Entry, ConfigError> {
        let full = format!("{section}.{key}");
        patch.get(&full).ok_or_else(|| ConfigError {
            line: Some(family.line),
            key: full,
            message: format!("required for family {}", family.value),
        })
    };
    let reject = |keys: &[&str]| -> Result<(), ConfigError> {
        for key in keys {
            if let Some(entry) = patch.get(&format!("{section}.{key}")) {
                return Err(ConfigError::at(
                    entry,
                    format!("not a key of family {}", family.value),
                ));
            }
        }
        Ok(())
    };
    let spec = match family.value.as_str() {
        "deterministic" => {
            reject(&["n", "p", "lambda", "pmf"])?;
            OffspringSpec::Deterministic {
                k: parse_u32(required("k")?)?,
            }
        }
        "binomial" => {
            reject(&["k", "lambda", "pmf"])?;
            OffspringSpec::Binomial {
                n: parse_u32(required("n")?)?,
                p: parse_f64(required("p")?)?,
            }
        }
        "poisson" => {
            reject(&["k", "n", "p", "pmf"])?;
            OffspringSpec::Poisson {
                lambda: parse_f64(required("lambda")?)?,
            }
        }
        "geometric" => {
            reject(&["k", "n", "lambda", "pmf"])?;
            OffspringSpec::Geometric {
                p: parse_f64(required("p")?)?,
            }
        }
        "table" => {
            reject(&["k", "n", "p", "lambda"])?;
            OffspringSpec::Table {
                pmf: parse_pmf(required("pmf")?)?,
            }
        }
        other => {
            return Err(ConfigError::at(
                family,
                format!(
                    "expected deterministic, binomial, poisson, geometric, or table, got `{other}`"
                ),
            ));
        }
    };
    // Distributional constraints (probabilities in range, sensible pmf) live
    // in the offspring constructors; surface them against the family's line.
    if let Err(e) = spec.build() {
        return Err(ConfigError {
            line: Some(family.line),
            key: family.key.clone(),
            message: e.to_string(),
        });
    }
    Ok(Some(spec))
}

/// Everything a run needs, assembled from defaults, an optional configuration
/// file, and command-line flags, in that order of precedence.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub suite: Option<String>,
    pub chain: ChainKind,
    pub offspring: OffspringSpec,
    pub offspring_alt: Option<OffspringSpec>,
    pub generations: u32,
    pub replicas: u32,
    pub cylinder_depth: u32,
    pub seed: u64,
    pub tolerance: f64,
    pub output_directory: Option<PathBuf>,
}

impl Settings {
    /// Defaults for plain simulation: the supercritical fixture on the
    /// three-regular tree.
    pub fn simulation_default() -> Settings {
        Settings {
            suite: None,
            chain: ChainKind::RegularTree { degree: 3 },
            offspring: OffspringSpec::Table {
                pmf: vec![(0, 0.25), (2, 0.75)],
            },
            offspring_alt: None,
            generations: 20,
            replicas: 100,
            cylinder_depth: 1,
            seed: DEFAULT_SEED,
            tolerance: 3.0,
            output_directory: None,
        }
    }

    /// Defaults for a named verification suite.
    pub fn for_suite(suite: &str) -> brw_core::Result<Settings> {
        let config = SuiteConfig::default_for(suite)?;
        Ok(Settings {
            suite: Some(config.suite),
            chain: config.chain,
            offspring: config.offspring,
            offspring_alt: config.offspring_alt,
            generations: config.generations,
            replicas: config.replicas,
            cylinder_depth: config.cylinder_depth,
            seed: config.seed,
            tolerance: config.tolerance,
            output_directory: None,
        })
    }

    /// Overlay a parsed configuration file.
    pub fn apply(&mut self, patch: &ConfigPatch) -> Result<(), ConfigError> {
        if let Some(entry) = patch.get("suite") {
            match &self.suite {
                Some(current) if *current != entry.value => {
                    return Err(ConfigError::at(
                        entry,
                        format!("conflicts with the suite named on the command line ({current})"),
                    ));
                }
                _ => self.suite = Some(entry.value.clone()),
            }
        }
        if let Some(chain) = chain_from(patch)? {
            self.chain = chain;
        }
        if let Some(offspring) = offspring_from(patch, "offspring")? {
            self.offspring = offspring;
        }
        if let Some(alt) = offspring_from(patch, "offspring_alt")? {
            self.offspring_alt = Some(alt);
        }
        if let Some(entry) = patch.get("run.generations") {
            self.generations = parse_u32(entry)?;
            if self.generations == 0 {
                return Err(ConfigError::at(entry, "must be at least 1"));
            }
        }
        if let Some(entry) = patch.get("run.replicas") {
            self.replicas = parse_u32(entry)?;
            if self.replicas == 0 {
                return Err(ConfigError::at(entry, "must be at least 1"));
            }
        }
        if let Some(entry) = patch.get("run.cylinder_depth") {
            self.cylinder_depth = parse_u32(entry)?;
            if self.cylinder_depth > MAX_CYLINDER_DEPTH {
                return Err(ConfigError::at(
                    entry,
                    format!("must be at most {MAX_CYLINDER_DEPTH}"),
                ));
            }
        }
        if let Some(entry) = patch.get("run.seed") {
            self.seed = parse_u64(entry)?;
        }
        if let Some(entry) = patch.get("run.tolerance") {
            self.tolerance = parse_f64(entry)?;
            if !(self.tolerance > 0.0) {
                return Err(ConfigError::at(entry, "must be positive"));
            }
        }
        if let Some(entry) = patch.get("output.directory") {
            self.output_directory = Some(PathBuf::from(&entry.value));
        }
        Ok(())
    }

    /// Reassemble a suite configuration; the suite must be named.
    pub fn to_suite_config(&self) -> brw_core::Result<SuiteConfig> {
        let suite = self.suite.clone().unwrap_or_default();
        let config = SuiteConfig {
            suite,
            chain: self.chain,
            offspring: self.offspring.clone(),
            offspring_alt: self.offspring_alt.clone(),
            generations: self.generations,
            replicas: self.replicas,
            cylinder_depth: self.cylinder_depth,
            seed: self.seed,
            tolerance: self.tolerance,
        };
        config.validate()?;
        Ok(config)
    }

    /// Render in configuration-file grammar (the output directory is a
    /// property of the invocation, not of the run, and is not echoed).
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(suite) = &self.suite {
            let _ = writeln!(out, "suite = {suite}");
        }
        out.push_str(&report::render_chain("chain", self.chain));
        out.push_str(&report::render_offspring("offspring", &self.offspring));
        if let Some(alt) = &self.offspring_alt {
            out.push_str(&report::render_offspring("offspring_alt", alt));
        }
        let _ = writeln!(out, "run.generations = {}", self.generations);
        let _ = writeln!(out, "run.replicas = {}", self.replicas);
        let _ = writeln!(out, "run.cylinder_depth = {}", self.cylinder_depth);
        let _ = writeln!(out, "run.seed = {}", self.seed);
        let _ = writeln!(out, "run.tolerance = {}", self.tolerance);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_examples() {
        let patch = parse_text("chain.kind=regular_tree\nchain.degree=3\n").unwrap();
        let mut settings = Settings::simulation_default();
        settings.apply(&patch).unwrap();
        assert_eq!(settings.chain, ChainKind::RegularTree { degree: 3 });

        let patch =
            parse_text("offspring.family=table\noffspring.pmf=\"0:0.25,2:0.75\"\n").unwrap();
        let mut settings = Settings::simulation_default();
        settings.apply(&patch).unwrap();
        let spec = OffspringSpec::Table {
            pmf: vec![(0, 0.25), (2, 0.75)],
        };
        assert_eq!(settings.offspring, spec);
        assert_eq!(spec.build().unwrap().mean_offspring(), 1.5);
    }

    #[test]
    fn rejects_a_recurrent_tree_degree_naming_key_and_line() {
        let patch = parse_text("chain.kind = regular_tree\nchain.degree = 2\n").unwrap();
        let err = Settings::simulation_default().apply(&patch).unwrap_err();
        assert_eq!(err.key, "chain.degree");
        assert_eq!(err.line, Some(2));
        let text = err.to_string();
        assert!(text.contains("line 2"), "{text}");
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed_keys() {
        let err = parse_text("chain.color = blue\n").unwrap_err();
        assert_eq!(err.key, "chain.color");
        assert_eq!(err.line, Some(1));

        let err = parse_text("run.seed = 1\nrun.seed = 2\n").unwrap_err();
        assert!(err.message.contains("duplicate"));
        assert_eq!(err.line, Some(2));

        let err = parse_text("run.seed\n").unwrap_err();
        assert!(err.message.contains("key = value"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\n\nrun.seed = 12 # trailing\n";
        let patch = parse_text(text).unwrap();
        let mut settings = Settings::simulation_default();
        settings.apply(&patch).unwrap();
        assert_eq!(settings.seed, 12);
    }

    #[test]
    fn partial_sections_and_stray_keys_are_rejected() {
        let err = parse_text("chain.degree = 4\n")
            .and_then(|p| Settings::simulation_default().apply(&p))
            .unwrap_err();
        assert_eq!(err.key, "chain.kind");

        let err = parse_text("chain.kind = lattice3d\nchain.degree = 4\n")
            .and_then(|p| Settings::simulation_default().apply(&p))
            .unwrap_err();
        assert_eq!(err.key, "chain.degree");
        assert!(err.message.contains("not a key of lattice3d"));

        let err = parse_text("offspring.family = poisson\noffspring.lambda = 1.4\noffspring.k = 2\n")
            .and_then(|p| Settings::simulation_default().apply(&p))
            .unwrap_err();
        assert_eq!(err.key, "offspring.k");
    }

    #[test]
    fn every_suite_default_round_trips_through_render_and_parse() {
        for suite in brw_core::experiments::SUITE_NAMES {
            let settings = Settings::for_suite(suite).unwrap();
            let rendered = settings.render();
            let patch = parse_text(&rendered).unwrap();
            let mut reparsed = Settings::simulation_default();
            reparsed.apply(&patch).unwrap();
            assert_eq!(reparsed, settings, "suite {suite}");
            assert_eq!(reparsed.render(), rendered, "suite {suite}");
        }
    }

    #[test]
    fn suite_conflicts_with_command_line_are_rejected() {
        let patch = parse_text("suite = identity\n").unwrap();
        let mut settings = Settings::for_suite("support").unwrap();
        let err = settings.apply(&patch).unwrap_err();
        assert!(err.message.contains("support"));
    }
}
