//! `metaug`: file-to-file pipeline for college labeling of thesis records.
//!
//! Each subcommand reads inputs, writes a run manifest naming its outputs,
//! then writes the outputs. Usage errors exit with status 2, data errors
//! with status 1.

mod boost;
mod chat;
mod config;
mod files;
mod manifest;
mod records;
mod scoring;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metaug_core::llm::Variant;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Parser)]
#[command(
    name = "metaug",
    version,
    about = "Assign colleges to thesis records and score classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSONL or CSV record file and write it as JSONL.
    Ingest(IngestArgs),
    /// Label records with their department's college.
    Label(LabelArgs),
    /// Split labeled records and write TF-IDF train/test matrices.
    Featurize(FeaturizeArgs),
    /// Train a boosted-tree model on a feature directory.
    Train(TrainArgs),
    /// Cross-validate every point of a parameter grid.
    Gridsearch(GridArgs),
    /// Predict the test split of a feature directory.
    Predict(PredictArgs),
    /// Draw per-college document samples for prompting.
    Sample(SampleArgs),
    /// Render one prompt file per sample.
    Prompt(PromptArgs),
    /// Classify samples through a chat endpoint.
    ClassifyLlm(ClassifyArgs),
    /// Score prediction files.
    Score(ScoreArgs),
    /// Render scores as markdown, csv or plot data.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    /// Record file (.jsonl or .csv).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args)]
pub struct LabelArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// JSON object mapping each college to its departments.
    #[arg(long)]
    pub mapping: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FeaturizeArgs {
    /// Labeled records (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the train/test split.
    #[arg(long)]
    pub seed: u64,
    /// Require every mapped college to have records.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Feature directory written by `featurize`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// TOML with a `[train]` table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct GridArgs {
    /// Feature directory written by `featurize`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Cross-validation table (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Grid file: parameter lists at top level or in a `[grid]` table,
    /// optional `folds`, optional `[train]` base values.
    #[arg(long)]
    pub config: PathBuf,
    /// Seed for fold assignment and training; overrides `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Feature directory written by `featurize`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Prediction CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Value of the `model` column.
    #[arg(long, default_value = "gbt")]
    pub name: String,
}

#[derive(Args)]
pub struct SampleArgs {
    /// Labeled records (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub mapping: PathBuf,
    /// Sample batches (JSONL, one batch per line).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// TOML with a `[sample]` table.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct PromptArgs {
    /// Sample batches written by `sample`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub mapping: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "plain")]
    pub variant: Variant,
}

#[derive(Args)]
pub struct ClassifyArgs {
    /// Sample batches written by `sample`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub mapping: PathBuf,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Base URL of an OpenAI-compatible API; `mock` or `mock:<faults>` for
    /// the offline mock; `replay:<dir>` to read saved
    /// `sample-NN.response.txt` files.
    #[arg(long)]
    pub endpoint: String,
    /// Model name sent to the endpoint and written to predictions.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = "plain")]
    pub variant: Variant,
    /// TOML with `[endpoint]` and `[experiment]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Resubmit a batch once if its answer cannot be parsed.
    #[arg(long)]
    pub repair: bool,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Prediction CSV; repeat for several files.
    #[arg(long = "in", required = true)]
    pub input: Vec<PathBuf>,
    /// Scores (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Reject labels that are not colleges of this mapping.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Scores written by `score`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// markdown, csv or plotdata.
    #[arg(long, default_value = "markdown")]
    pub format: String,
    /// Column order for colleges.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(a) => records::ingest(&a),
        Command::Label(a) => records::label(&a),
        Command::Featurize(a) => records::featurize(&a),
        Command::Train(a) => boost::train(&a),
        Command::Gridsearch(a) => boost::gridsearch(&a),
        Command::Predict(a) => boost::predict(&a),
        Command::Sample(a) => chat::sample(&a),
        Command::Prompt(a) => chat::prompt(&a),
        Command::ClassifyLlm(a) => chat::classify(&a),
        Command::Score(a) => scoring::score(&a),
        Command::Report(a) => scoring::report(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
