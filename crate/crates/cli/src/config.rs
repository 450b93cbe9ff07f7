//! Pipeline configuration file (TOML).
//!
//! Every section is optional and falls back to the library defaults. Unknown
//! keys are rejected, and every value is validated before any command runs.

use std::path::{Path, PathBuf};

use qar_mass::evaluate::{ReportConfig, SplitSpec};
use qar_mass::preprocess::PreprocessConfig;
use qar_mass::regress::{MlpConfig, RegressorKind, TreeConfig};
use qar_mass::simulator::FleetSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Master seed for the simulator, the flight split and MLP training.
    pub seed: u64,
    /// Worker threads for per-flight stages; 0 uses every core.
    pub jobs: usize,
    pub paths: PathsConfig,
    pub simulate: FleetSpec,
    pub preprocess: PreprocessConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub report: ReportConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            paths: PathsConfig::default(),
            simulate: FleetSpec::default(),
            preprocess: PreprocessConfig::default(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            report: ReportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    /// Run directory holding every artifact.
    pub out: PathBuf,
    /// Input record directory; `<out>/records` when unset.
    pub records: Option<PathBuf>,
    /// Bundle used by `predict`; `<out>/models/model_<predict_with>.json` when unset.
    pub model: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("run"),
            records: None,
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Regressors fitted by `train` and scored by `evaluate`.
    pub regressors: Vec<RegressorKind>,
    pub predict_with: RegressorKind,
    /// Encode registrations absent from the training flights through an
    /// extra "unknown" column instead of failing.
    pub unknown_registration: bool,
    pub ridge_lambda: f64,
    pub mlp: MlpConfig,
    pub tree: TreeConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regressors: RegressorKind::ALL.to_vec(),
            predict_with: RegressorKind::Mlp,
            unknown_registration: false,
            ridge_lambda: 1.0,
            mlp: MlpConfig::default(),
            tree: TreeConfig::fleet(),
        }
    }
}

// Seeds are derived from the top-level `seed` only.
const SECTION_SEEDS: [&str; 4] = ["simulate.seed", "simulate.noise.seed", "split.seed", "train.mlp.seed"];

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates `text`; `origin` prefixes every message.
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{origin}: {e}")))?;
        for key in SECTION_SEEDS {
            if lookup(&table, key) {
                return Err(located(origin, text, key, "seeds are set by the top-level `seed` key"));
            }
        }
        let syntax = |e: toml::de::Error| CliError::Config(format!("{origin}: {e}"));
        let mut unknown = Vec::new();
        let de = toml::de::Deserializer::parse(text).map_err(syntax)?;
        let config: PipelineConfig = serde_ignored::deserialize(de, |p| unknown.push(p.to_string())).map_err(syntax)?;
        if let Some(key) = unknown.first() {
            return Err(located(origin, text, key, "unknown key"));
        }
        let seed = config.seed;
        let config = config.with_seed(seed);
        config.validate_with(|section, message| located(origin, text, section, &message))?;
        Ok(config)
    }

    /// Applies `seed` to every seeded stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.simulate.seed = seed;
        self.split.seed = seed;
        self.train.mlp.seed = seed;
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        self.validate_with(|section, message| CliError::Config(format!("[{section}] {message}")))
    }

    fn validate_with(&self, err: impl Fn(&str, String) -> CliError) -> CliResult<()> {
        let check = |section: &str, r: qar_mass::Result<()>| r.map_err(|e| err(section, e.to_string()));
        check("simulate", self.simulate.validate())?;
        check("preprocess", self.preprocess.validate())?;
        check("preprocess.segment", self.preprocess.segment.validate())?;
        check("preprocess.cleaning", self.preprocess.cleaning.validate())?;
        check("preprocess.dicca", self.preprocess.dicca.validate())?;
        check("train.mlp", self.train.mlp.validate())?;
        check("train.tree", self.train.tree.validate())?;
        check("split", self.split.validate())?;
        check("report", self.report.validate())?;
        let t = &self.train;
        if t.regressors.is_empty() {
            return Err(err("train.regressors", "at least one regressor is required".into()));
        }
        let mut kinds = t.regressors.clone();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != t.regressors.len() {
            return Err(err("train.regressors", "regressors must not repeat".into()));
        }
        if !(t.ridge_lambda >= 0.0 && t.ridge_lambda.is_finite()) {
            return Err(err("train.ridge_lambda", format!("ridge_lambda must be finite and >= 0, got {}", t.ridge_lambda)));
        }
        if self.paths.out.as_os_str().is_empty() {
            return Err(err("paths.out", "output directory must not be empty".into()));
        }
        Ok(())
    }
}

fn lookup(table: &toml::Table, dotted: &str) -> bool {
    let mut parts = dotted.split('.').peekable();
    let mut current = table;
    while let Some(part) = parts.next() {
        match current.get(part) {
            Some(toml::Value::Table(t)) if parts.peek().is_some() => current = t,
            Some(_) if parts.peek().is_none() => return true,
            _ => return false,
        }
    }
    false
}

/// `origin:line: [key] message`, pointing at the key (or its table header)
/// when it can be found in the source.
fn located(origin: &str, text: &str, dotted: &str, message: &str) -> CliError {
    let line = find_line(text, dotted, message);
    match line {
        Some(n) => CliError::Config(format!("{origin}:{n}: [{dotted}] {message}")),
        None => CliError::Config(format!("{origin}: [{dotted}] {message}")),
    }
}

fn find_line(text: &str, dotted: &str, message: &str) -> Option<usize> {
    let mut table = String::new();
    let mut header_line = None;
    let mut section_hit = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            table = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if table == dotted {
                header_line = Some(i + 1);
            }
            continue;
        }
        let Some((key, _)) = line.split_once('=') else { continue };
        let key = key.trim().trim_matches('"');
        let full = if table.is_empty() { key.to_string() } else { format!("{table}.{key}") };
        if full == dotted {
            return Some(i + 1);
        }
        // a validation message naming one of the section's keys
        if table == dotted && section_hit.is_none() && mentions(message, key) {
            section_hit = Some(i + 1);
        }
    }
    section_hit.or(header_line)
}

fn mentions(message: &str, key: &str) -> bool {
    message
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .any(|w| w == key)
}
