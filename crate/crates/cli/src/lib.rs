//! `qar-mass`: simulate fleets, preprocess QAR-style records, train and
//! evaluate mass regressors, predict and report.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use qar_mass::regress::RegressorKind;
use serde::Serialize;

pub mod commands;
pub mod config;
pub mod error;
pub mod plots;
pub mod records;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "qar-mass", version, about = "Aircraft initial-climb mass estimation from flight records")]
pub struct Cli {
    /// Pipeline configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides the configured master seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Overrides the configured run directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads for per-flight stages (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic fleet: one record per flight plus manifest.csv.
    Simulate,
    /// Segment, clean and smooth every record into per-flight feature tables.
    Preprocess,
    /// Split flights and fit the configured regressors.
    Train,
    /// Score fitted regressors on every partition and write plot data.
    Evaluate,
    /// Estimate the initial mass of each given record.
    Predict {
        /// Record files; every record in the record directory when empty.
        records: Vec<PathBuf>,
        /// Model bundle to use instead of the configured one.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Summarize preprocessing and evaluation results in report.md.
    Report,
}

/// Where every artifact of a run lives.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
    pub records: PathBuf,
}

impl Layout {
    pub fn new(config: &PipelineConfig) -> Self {
        let out = config.paths.out.clone();
        let records = config.paths.records.clone().unwrap_or_else(|| out.join("records"));
        Self { out, records }
    }

    pub fn manifest(&self) -> PathBuf {
        self.out.join("manifest.csv")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.out.join("features")
    }

    pub fn preprocess_summary(&self) -> PathBuf {
        self.out.join("preprocess_summary.json")
    }

    pub fn split(&self) -> PathBuf {
        self.out.join("models").join("split.json")
    }

    pub fn model(&self, kind: RegressorKind) -> PathBuf {
        self.out.join("models").join(format!("model_{kind}.json"))
    }

    pub fn history(&self, kind: RegressorKind) -> PathBuf {
        self.out.join("models").join(format!("history_{kind}.csv"))
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.out.join("eval")
    }

    pub fn eval_report(&self, kind: RegressorKind) -> PathBuf {
        self.eval_dir().join(format!("eval_{kind}.json"))
    }

    pub fn predictions(&self) -> PathBuf {
        self.out.join("predictions.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.out.join("report.md")
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e.into()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::malformed(path, e.to_string()))
}

/// Resolves the configuration from file and flags.
pub fn resolve_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        config.paths.out = out.clone();
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config = resolve_config(&cli)?;
    let layout = Layout::new(&config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", config.jobs)))?;
    pool.install(|| match cli.command {
        Command::Simulate => commands::simulate(&config, &layout).map(drop),
        Command::Preprocess => commands::preprocess(&config, &layout).map(drop),
        Command::Train => commands::train(&config, &layout),
        Command::Evaluate => commands::evaluate(&config, &layout),
        Command::Predict { records, model } => commands::predict(&config, &layout, &records, model.as_deref()).map(drop),
        Command::Report => commands::report(&config, &layout),
    })
}
