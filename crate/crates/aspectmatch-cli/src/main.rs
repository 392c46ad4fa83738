//! Command-line surface: evaluation, correlation, the data pipeline stages,
//! and the alignment loop.

mod cmd;
mod io;
mod mock;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes: 0 success, 1 internal error, 2 schema/usage error, 3
/// provider/client failure, 4 alignment budget exhausted.
#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Provider(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Provider(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Schema(m) | CliError::Provider(m) | CliError::Internal(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "aspectmatch",
    about = "Aspect-based image-text mismatch evaluation and data tooling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a prediction file against a dataset with the ITM-IoU metric.
    Evaluate(EvaluateArgs),
    /// Correlate per-example metric scores with human ratings.
    Correlate(CorrelateArgs),
    /// Data pipeline stages: generate, filter, select-queries, rank.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Run the generate/detect/edit alignment loop.
    Autoalign(AutoalignArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset JSONL: one example per line.
    #[arg(long)]
    dataset: PathBuf,
    /// Prediction JSONL: {"id", "raw"} or {"id", "triplets": [...]}.
    #[arg(long)]
    pred: PathBuf,
    /// Task surface: md (detection) or mdc (detection and correction).
    #[arg(long)]
    task: String,
    /// Evaluation config JSON; defaults carry the published constants.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Similarity backend.
    #[arg(long, value_parser = ["fallback", "remote"])]
    backend: Option<String>,
    /// Report output path (written atomically).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV export of the breakdown tables.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Include per-example results in the report.
    #[arg(long)]
    per_example: bool,
    /// Compatibility mode: independent best-gold matching with the IoU
    /// factor clipped to 1.
    #[arg(long)]
    unbounded_matching: bool,
    /// Worker threads for corpus evaluation.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Report JSON produced by evaluate --per-example.
    #[arg(long)]
    scores: PathBuf,
    /// Human ratings JSONL: {"id", "score"} with scores in [1, 5].
    #[arg(long)]
    human: PathBuf,
    /// Optional JSON summary output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Counterfactual caption generation: parse, replace nodes, regenerate.
    Generate(GenerateArgs),
    /// Debias filtering of candidate caption pairs.
    Filter(FilterArgs),
    /// Keep queries with deep constituency trees.
    SelectQueries(SelectQueriesArgs),
    /// Rank retrieved image candidates.
    Rank(RankArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Input JSONL: {"id", "caption", "image"?}.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Scripted client replies for offline runs.
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Completion endpoint (defaults to $LLM_ENDPOINT).
    #[arg(long)]
    llm_endpoint: Option<String>,
    /// Nodes to replace per caption (1..=3).
    #[arg(long, default_value_t = 1)]
    replacements: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory overriding the built-in prompt templates.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Input JSONL: {"id", "original_caption", "mutated_caption", "image"}.
    #[arg(long)]
    input: PathBuf,
    /// Kept candidates (JSONL, same shape as the input).
    #[arg(long)]
    out: PathBuf,
    /// Rejected candidates with the failing rule.
    #[arg(long)]
    rejected: Option<PathBuf>,
    /// Filter thresholds JSON; defaults disable every rule.
    #[arg(long)]
    filter_config: Option<PathBuf>,
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Scorer endpoints as kind=url (repeatable; kinds: vera, grammar, clip).
    #[arg(long)]
    scorer_endpoint: Vec<String>,
}

#[derive(Args)]
struct SelectQueriesArgs {
    /// Input JSONL: {"query", "tree"} with bracketed constituency trees.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Malformed-tree rejections with reasons.
    #[arg(long)]
    rejected: Option<PathBuf>,
    #[arg(long)]
    min_depth: usize,
}

#[derive(Args)]
struct RankArgs {
    /// Input JSONL: {"image", "clip_score", "aesthetic_score", "width", "height"}.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    clip_weight: f64,
    #[arg(long, default_value_t = 0.3)]
    aesthetic_weight: f64,
    #[arg(long, default_value_t = 0)]
    min_width: u32,
    #[arg(long, default_value_t = 0)]
    min_height: u32,
}

#[derive(Args)]
struct AutoalignArgs {
    #[arg(long)]
    prompt: String,
    /// Trace output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    max_iters: usize,
    /// Scripted module replies for offline runs.
    #[arg(long)]
    mock: Option<PathBuf>,
    #[arg(long)]
    t2i_endpoint: Option<String>,
    #[arg(long)]
    detector_endpoint: Option<String>,
    #[arg(long)]
    prompt_endpoint: Option<String>,
    #[arg(long)]
    editor_endpoint: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Evaluate(args) => cmd::evaluate::run(args),
        Command::Correlate(args) => cmd::correlate::run(args),
        Command::Pipeline(command) => match command {
            PipelineCommand::Generate(args) => cmd::pipeline::generate(args),
            PipelineCommand::Filter(args) => cmd::pipeline::filter(args),
            PipelineCommand::SelectQueries(args) => cmd::pipeline::select_queries(args),
            PipelineCommand::Rank(args) => cmd::pipeline::rank(args),
        },
        Command::Autoalign(args) => cmd::autoalign::run(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
