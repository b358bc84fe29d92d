//! The `hatebench` command line.
//!
//! Exit codes: 0 success, 1 validation error (bad configuration, unknown
//! names, missing inputs, refused overwrite, no matching runs), 2 runtime
//! failure during execution.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::ConfigError;
use crate::corpus::CorpusError;
use crate::embeddings::EmbeddingError;
use crate::evaluation::EvalError;
use crate::scenarios::{ScenarioError, ScenarioKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hatebench", version, about = "Multilingual hate-speech classification experiments")]
pub struct Cli {
    /// Framework configuration file.
    #[arg(long, global = true, env = "HATEBENCH_CONFIG", default_value = "hatebench.toml")]
    pub config: PathBuf,
    /// Seed for splits, initialization and shuffling (overrides config and scenario).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Embedding backend id (overrides the scenario's choice).
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Parallel monolingual runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Replace existing runs with the same id hash.
    #[arg(long, global = true)]
    pub force: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build canonical corpora from the declared sources.
    Ingest {
        /// Languages to build; all languages with sources when omitted.
        languages: Vec<String>,
    },
    /// Execute a scenario configuration end to end.
    Run {
        scenario: PathBuf,
    },
    /// Render a comparison table from completed runs.
    Report {
        /// Run ids (or their trailing hash); all runs when omitted.
        run_ids: Vec<String>,
        #[arg(long)]
        kind: Option<KindArg>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long, value_enum, default_value_t = AxisArg::Scenario)]
        axis: AxisArg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Also write the rendered table to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print per-language corpus statistics.
    Stats {
        languages: Vec<String>,
        /// Compare against the published full-size totals.
        #[arg(long)]
        reference: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Monolingual,
    Multilingual,
    LanguageFamily,
}

impl From<KindArg> for ScenarioKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Monolingual => ScenarioKind::Monolingual,
            KindArg::Multilingual => ScenarioKind::Multilingual,
            KindArg::LanguageFamily => ScenarioKind::LanguageFamily,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Scenario,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Markdown,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError { code: EXIT_RUNTIME, message: message.into() }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        let code = if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME };
        CliError { code, message: e.to_string() }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::NoRuns
            | EvalError::ProvenanceMismatch { .. }
            | EvalError::AmbiguousCell { .. }
            | EvalError::Argument(_) => CliError::validation(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::BackendUnavailable { .. } | EmbeddingError::InvalidConfig { .. } => {
                CliError::validation(e.to_string())
            }
            _ => CliError::runtime(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::validation(e.to_string())
            }
            CorpusError::Language(_) => CliError::validation(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn main() -> i32 {
    run_with_args(std::env::args_os())
}

pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
