use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relevance_core::simulation::ReportFormat;
use relevance_core::{AverageMode, ModelType, OptimizerKind};

#[derive(Debug, Parser)]
#[command(name = "relevance", version, about = "Online relevance classification of crisis tweets")]
pub struct Cli {
    /// Flat TOML file whose keys mirror the long flag names.
    #[arg(long, global = true, env = "RELEVANCE_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a labeled corpus 10 tweets at a time and report per-iteration scores.
    Simulate(SimulateArgs),
    /// Random search over hyperparameter configurations, ranked by average F1.
    Tune(TuneArgs),
    /// Run the HTTP labeling service.
    Serve(ServeArgs),
    /// Stream a corpus (without labels) to a running service.
    Replay(ReplayArgs),
    /// Summarize one or more simulation report files.
    EvalReport(EvalReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    /// Pick by header: `choose_one` means Figure Eight, otherwise CrisisLex.
    Auto,
    FigureEight,
    Crisislex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl From<OutputFormat> for ReportFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => ReportFormat::Csv,
            OutputFormat::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Labeled CSV corpus; repeat to run several.
    #[arg(long, env = "RELEVANCE_DATASET")]
    pub dataset: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// Override a CrisisLex informativeness mapping, e.g. "Not applicable=Not Relevant".
    #[arg(long = "map", value_name = "VALUE=LABEL")]
    pub label_map: Vec<String>,
    /// word2vec binary (.bin) or text (.txt/.vec) embeddings.
    #[arg(long, env = "RELEVANCE_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    /// Train/validation/test percentages, e.g. 50/0/50.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long, env = "RELEVANCE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelType>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub recurrent_dropout: Option<f64>,
    /// Number of CNN filters.
    #[arg(long)]
    pub filters: Option<usize>,
    /// CNN kernel width.
    #[arg(long)]
    pub kernel: Option<usize>,
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<OptimizerKind>,
    /// Recurrent hidden units.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    /// Labels delivered per iteration.
    #[arg(long)]
    pub delivery_size: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<AverageMode>,
    /// Stop after this many iterations.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Record measured CPU seconds in output files (makes them non-reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Parallel runs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub stream: StreamArgs,
    /// Report file, or a directory when several datasets are given.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub report_format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub stream: StreamArgs,
    /// Search-space TOML; defaults to the nine tuned configurations.
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub report_format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, env = "RELEVANCE_LISTEN")]
    pub listen: Option<SocketAddr>,
    #[arg(long, env = "RELEVANCE_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, env = "RELEVANCE_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, env = "RELEVANCE_MAX_BATCH")]
    pub max_batch: Option<usize>,
    /// Estimator slope in `a·ln(n) + b`.
    #[arg(long, env = "RELEVANCE_TREND_A")]
    pub trend_a: Option<f64>,
    #[arg(long, env = "RELEVANCE_TREND_B")]
    pub trend_b: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long, env = "RELEVANCE_DATASET")]
    pub dataset: Vec<PathBuf>,
    /// Items per second.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Base URL of the service, e.g. http://127.0.0.1:8080.
    #[arg(long, env = "RELEVANCE_TARGET")]
    pub target: Option<String>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub retries: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalReportArgs {
    /// Report CSV written by `simulate`.
    #[arg(long = "report", required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub report_format: Option<OutputFormat>,
}

fn parse_model(s: &str) -> Result<ModelType, String> {
    s.parse().map_err(|e: relevance_core::Error| e.to_string())
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    s.parse().map_err(|e: relevance_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<AverageMode, String> {
    s.parse().map_err(|e: relevance_core::Error| e.to_string())
}
