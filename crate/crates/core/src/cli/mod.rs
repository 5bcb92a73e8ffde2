//! `tsids` command line: simulate, ingest, fit, detect, report.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.

mod commands;
mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::ingest::Feature;

pub use plot::{svg_line_chart, ChartSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "tsids",
    version,
    about = "Time-series intrusion detection on per-second traffic features"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic polling traffic with injected attacks.
    Simulate(SimulateArgs),
    /// Aggregate packet events into a per-second feature CSV.
    Ingest(IngestArgs),
    /// Fit a SARIMA model or train an LSTM on a clean training range.
    Fit(FitArgs),
    /// Run a detector and write per-second results, a report and optional plots.
    Detect(DetectArgs),
    /// Summarize report JSON files into CSV tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Detector {
    #[value(name = "matrix_profile", alias = "mp")]
    MatrixProfile,
    Sarima,
    Lstm,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::MatrixProfile => "matrix_profile",
            Detector::Sarima => "sarima",
            Detector::Lstm => "lstm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LstmThreshold {
    /// Minimum error over malicious seconds.
    Ma,
    /// Just above the maximum error over benign seconds.
    Nm,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON simulation config; individual flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub duration: Option<u32>,
    #[arg(long)]
    pub n_rtus: Option<usize>,
    #[arg(long)]
    pub n_mtus: Option<usize>,
    #[arg(long)]
    pub poll_interval: Option<u32>,
    /// Expected manual operations per minute.
    #[arg(long)]
    pub manual_op_rate: Option<f64>,
    #[arg(long)]
    pub keepalive_links: Option<usize>,
    #[arg(long)]
    pub keepalive_prob: Option<f64>,
    /// Attack as `kind@start:duration:intensity`, e.g. `scan_burst@45.2:2:8`. Repeatable.
    #[arg(long = "attack")]
    pub attacks: Vec<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Packet-event CSV or JSONL (`.jsonl`).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Also write byte and protocol counts.
    #[arg(long)]
    pub extended: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Seasonal AR orders `p,d,q,P,D,Q,s`.
    #[arg(long, default_value = "4,0,0,1,0,0,10")]
    pub orders: String,
    /// Learning rate for SARIMA gradient descent or LSTM Adam.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Gradient-descent iteration cap for SARIMA.
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 10)]
    pub seq_len: usize,
    /// LSTM training iterations.
    #[arg(long, default_value_t = 2_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 50)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Feature CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = ["sarima", "lstm"])]
    pub detector: String,
    /// Features to fit, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "port_pairs")]
    pub feature: Vec<Feature>,
    /// Training seconds `a:b` (half-open); defaults to the whole series.
    #[arg(long)]
    pub train_range: Option<String>,
    /// LSTM only: drop training windows that touch labeled seconds.
    #[arg(long)]
    pub strip_labeled: bool,
    /// Accept labeled seconds inside the training range.
    #[arg(long)]
    pub allow_labeled: bool,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Feature CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub detector: Detector,
    #[arg(long, value_delimiter = ',', default_value = "port_pairs")]
    pub feature: Vec<Feature>,
    /// Model file from `fit`; one per feature, in `--feature` order.
    #[arg(long = "model", value_delimiter = ',')]
    pub models: Vec<PathBuf>,
    /// Training seconds `a:b`; fits in place for sarima/lstm and is the matrix profile prefix.
    #[arg(long)]
    pub train_range: Option<String>,
    /// Evaluated seconds `a:b`; defaults to everything after the training range.
    #[arg(long)]
    pub test_range: Option<String>,
    #[arg(long)]
    pub strip_labeled: bool,
    #[arg(long)]
    pub allow_labeled: bool,
    /// Matrix profile window length.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Matrix profile exclusion zone; defaults to m/2.
    #[arg(long)]
    pub exclusion: Option<usize>,
    /// Fixed matrix profile threshold instead of the perfect threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 0.9995)]
    pub quantile: f64,
    #[arg(long, default_value_t = 1.0)]
    pub multiplier: f64,
    #[arg(long, value_enum, default_value = "ma")]
    pub lstm_threshold: LstmThreshold,
    /// Ground-truth JSON from `simulate` for real-valued attack starts.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Include confusion counts and metrics for the matrix profile.
    #[arg(long)]
    pub confusion: bool,
    /// Write an SVG chart per feature.
    #[arg(long)]
    pub plot: bool,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files or directories containing `report_*.json`.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Ingest(a) => commands::ingest(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Detect(a) => commands::detect(&a),
        Command::Report(a) => commands::report(&a),
    }
}
