//! Command-line front end: `ingest`, `prepare`, `costs`, `train`, `sweep`,
//! `session`, `inspect` and `synth`.

mod commands;
mod config;
mod session;

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::acquisition::{AcquisitionError, Cost};
use crate::costs::CostError;
use crate::data::DataError;
use crate::eval::EvalError;
use crate::strategies::StrategyError;
use crate::xpt::XptError;

pub use config::{relative_path, DataPaths, RunConfig, SweepGrid};

/// Failures, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<XptError> for CliError {
    fn from(e: XptError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CostError> for CliError {
    fn from(e: CostError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AcquisitionError> for CliError {
    fn from(e: AcquisitionError) -> Self {
        match e {
            AcquisitionError::InvalidRule(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<StrategyError> for CliError {
    fn from(e: StrategyError) -> Self {
        match e {
            StrategyError::InvalidConfig(_) | StrategyError::ZeroCost(_) => CliError::Config(e.to_string()),
            StrategyError::Data(d) => d.into(),
            StrategyError::Acquisition(a) => a.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidInput(_) => CliError::Config(e.to_string()),
            EvalError::Strategy(s) => s.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "costsense", version, about = "Cost-sensitive feature acquisition at test time")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; every random choice derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Results root directory.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Task name: diabetes, heart, hypertension, custom, informative,
    /// cost-sensitive or binary-toy.
    #[arg(long, global = true)]
    pub task: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert XPT files into a directory of per-variable tables.
    Ingest(IngestArgs),
    /// Build a dataset bundle from variable tables or a synthetic generator.
    Prepare(PrepareArgs),
    /// Derive the category cost table from survey responses.
    Costs(CostsArgs),
    /// Train the shared predictor and strategy checkpoints.
    Train(TrainArgs),
    /// Trace accuracy-versus-cost curves and write result files.
    Sweep(SweepArgs),
    /// Step through one instance interactively.
    Session(SessionArgs),
    /// Print a bundle, catalog, manifest, checkpoint or XPT file.
    Inspect(InspectArgs),
    /// Write synthetic survey-like variable tables.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// XPT transport files.
    #[arg(required = true)]
    pub xpt: Vec<PathBuf>,
    /// Variable table directory to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Subject identifier variable.
    #[arg(long, default_value = "SEQN")]
    pub id: String,
    /// Category for every variable; guessed from names when absent.
    #[arg(long)]
    pub category: Option<String>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub variables: Option<PathBuf>,
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// Bundle directory to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Minimum mutual information with the label.
    #[arg(long)]
    pub tau_mi: Option<f64>,
    /// Minimum fraction of subjects with the variable available.
    #[arg(long)]
    pub tau_avail: Option<f64>,
    /// Rows generated for synthetic tasks.
    #[arg(long)]
    pub rows: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CostsArgs {
    /// Survey responses (one row per respondent); the bundled survey when absent.
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// Bundle whose catalog costs are restamped from the table.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Also write the table to this CSV file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Strategies to train; the configured list when absent.
    #[arg(long = "strategy", short = 's')]
    pub strategies: Vec<String>,
    /// Checkpoint directory to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    /// Strategies to evaluate; the configured list when absent.
    #[arg(long = "strategy", short = 's')]
    pub strategies: Vec<String>,
    /// Budget grid, e.g. `1,2,4,8`.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<Cost>>,
    /// Split to evaluate on: train, validation or test.
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    #[arg(long = "strategy", short = 's')]
    pub strategy: String,
    /// Per-instance spending cap.
    #[arg(long)]
    pub budget: Option<Cost>,
    /// Stop once certainty reaches this value.
    #[arg(long)]
    pub confidence: Option<f64>,
    /// λ of the policy to follow, for cost-penalty strategies.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
    /// Data rows shown per XPT member.
    #[arg(long, default_value_t = 5)]
    pub rows: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Variable table directory to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub rows: usize,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to `err`.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                2
            } else {
                let _ = write!(out, "{rendered}");
                0
            };
        }
    };
    match execute(cli, input, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "costsense: {e}");
            e.exit_code()
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = global.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &global.output {
        cfg.output = o.clone();
    }
    if let Some(t) = &global.task {
        cfg.task = t.clone();
    }
    Ok(cfg)
}

pub fn execute(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Ingest(a) => commands::ingest(&cfg, a, out),
        Command::Prepare(a) => commands::prepare(&mut cfg, a, out),
        Command::Costs(a) => commands::costs(&cfg, a, out),
        Command::Train(a) => commands::train(&mut cfg, a, out),
        Command::Sweep(a) => commands::sweep(&mut cfg, a, out),
        Command::Session(a) => session::session(&mut cfg, a, input, out),
        Command::Inspect(a) => commands::inspect(a, out),
        Command::Synth(a) => commands::synth(&cfg, a, out),
    }
}
