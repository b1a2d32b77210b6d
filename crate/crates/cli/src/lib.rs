//! `wellstate` command-line pipeline.
//!
//! Subcommands: `synth` (synthetic corpus and feature inputs), `annotate`
//! (S8D ratings through an LLM backend), `run` (feature assembly, nested
//! cross-validation, evidence spans, reports) and `score` (external
//! predictions against gold). Every output directory gets a `manifest.json`
//! with input hashes and the seed.
//!
//! Exit codes: 0 ok, 1 internal error, 2 configuration error, 3 backend
//! failure, 4 data mismatch.

pub mod commands;
pub mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use wellstate_core::annotate::AnnotateError;
use wellstate_core::corpus::CorpusError;
use wellstate_core::eval::EvalError;
use wellstate_core::features::FeatureError;
use wellstate_core::insight::InsightError;

pub use config::{BackendKind, Preset, RunConfig, SourceSpec, TaskKind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("data mismatch: {0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidConfig(_) => CliError::Config(e.to_string()),
            CorpusError::Io { .. } => CliError::Internal(e.to_string()),
            CorpusError::Malformed { .. } | CorpusError::InvariantViolation(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::UnknownSource(_) | FeatureError::IllegalGranularity(_) => CliError::Config(e.to_string()),
            FeatureError::Io { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::TooFewGroups { .. } | EvalError::InvalidK(_) | EvalError::EmptyGrid | EvalError::InvalidThreshold(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<InsightError> for CliError {
    fn from(e: InsightError) -> Self {
        match e {
            InsightError::Io { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AnnotateError> for CliError {
    fn from(e: AnnotateError) -> Self {
        match e {
            AnnotateError::Backend(_) | AnnotateError::ExhaustedRetries { .. } => CliError::Backend(e.to_string()),
            AnnotateError::Io { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wellstate", version, about = "Language-based well-being assessment pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override the configuration file.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory laid out like `synth` output; fills in missing input paths.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Feature selection such as `plt` or `situa+plt`.
    #[arg(long, global = true)]
    pub features: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub task: Option<TaskKind>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Comma-separated penalty grid.
    #[arg(long, global = true, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub threshold_adaptive: Option<f64>,
    #[arg(long, global = true)]
    pub threshold_maladaptive: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long, global = true)]
    pub cache_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with feature tables and embeddings.
    Synth {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Rate every post on the eight situation dimensions.
    Annotate,
    /// Assemble features, run nested cross-validation and write reports.
    Run {
        /// Permute the targets with this seed (negative control).
        #[arg(long)]
        shuffle_labels: Option<u64>,
    },
    /// Score external predictions against a gold corpus.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
}

/// Parse arguments, run, and return the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let config = RunConfig::from_overrides(&cli.overrides)?;
    match &cli.command {
        Command::Synth { preset } => {
            let mut config = config;
            if let Some(p) = preset {
                config.synth.preset = *p;
            }
            let files = commands::cmd_synth(&config)?;
            println!("wrote {} files to {}", files.len(), config.out.display());
        }
        Command::Annotate => {
            let report = commands::cmd_annotate(&config)?;
            println!("annotated {} post(s), {} failure(s)", report.scores.len(), report.failures.len());
        }
        Command::Run { shuffle_labels } => {
            let mut config = config;
            if shuffle_labels.is_some() {
                config.shuffle_labels = *shuffle_labels;
            }
            let outcome = commands::cmd_run(&config)?;
            for (metric, value) in &outcome.cv.metrics {
                println!("{metric}\t{value}");
            }
        }
        Command::Score { gold, pred } => {
            let scores = commands::cmd_score(&config, gold, pred)?;
            for (metric, value) in &scores {
                println!("{metric}\t{value}");
            }
        }
    }
    Ok(())
}
