//! The evaluate subcommand: dataset + predictions -> report.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use aspectmatch::metric::{evaluate_corpus, CorpusReport, EvalConfig, MetricError};
use aspectmatch::model::{validate_record, ExampleRecord, PredictionRecord, Task};
use aspectmatch::similarity::{
    HttpEmbeddingProvider, SimilarityBackend, SimilarityError, TextScorer,
};
use serde::{Deserialize, Serialize};

use crate::io::{read_json, read_jsonl, write_json_atomic};
use crate::{CliError, EvaluateArgs};

/// The report document: the corpus report plus a timestamp. Re-running with
/// identical inputs and config reproduces it byte for byte apart from the
/// timestamp.
#[derive(Serialize, Deserialize)]
pub struct ReportFile {
    pub timestamp_unix: u64,
    #[serde(flatten)]
    pub report: CorpusReport,
}

pub fn run(args: EvaluateArgs) -> Result<u8, CliError> {
    let task: Task = args
        .task
        .parse()
        .map_err(|e: String| CliError::Schema(e))?;

    let mut cfg: EvalConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => EvalConfig::default(),
    };
    cfg.task = task;
    if let Some(backend) = &args.backend {
        cfg.similarity.backend = match backend.as_str() {
            "remote" => SimilarityBackend::Remote,
            _ => SimilarityBackend::Fallback,
        };
    }
    if args.unbounded_matching {
        cfg.unbounded_matching = true;
    }
    cfg.validate().map_err(map_metric_error)?;

    let dataset: Vec<ExampleRecord> = read_jsonl(&args.dataset)?;
    validate_dataset(&dataset, &cfg, &args)?;
    let predictions: Vec<PredictionRecord> = read_jsonl(&args.pred)?;

    let scorer = build_scorer(&cfg)?;
    let mut report = evaluate_corpus(
        &dataset,
        &predictions,
        &cfg,
        &scorer,
        args.workers.max(1),
    )
    .map_err(map_metric_error)?;

    println!(
        "ITM-IoU {:.4} over {} examples ({} warnings)",
        report.overall_itm_iou,
        report.example_count,
        report.warnings.total()
    );

    if let Some(path) = &args.csv {
        write_breakdown_csv(path, &report)?;
    }
    if !args.per_example {
        report.per_example.clear();
    }
    if let Some(out) = &args.out {
        let file = ReportFile {
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            report,
        };
        write_json_atomic(out, &file)?;
    }
    Ok(0)
}

fn write_breakdown_csv(path: &std::path::Path, report: &CorpusReport) -> Result<(), CliError> {
    let mut csv = String::from("dimension,bucket,mean_itm_iou,count\n");
    for (dimension, table) in [
        ("class", &report.by_class),
        ("source", &report.by_source),
        ("gold_count", &report.by_gold_count),
    ] {
        for (bucket, stats) in table {
            csv.push_str(&format!(
                "{dimension},{bucket},{},{}\n",
                stats.mean_itm_iou, stats.count
            ));
        }
    }
    crate::io::write_text_atomic(path, &csv)
}

fn validate_dataset(
    dataset: &[ExampleRecord],
    cfg: &EvalConfig,
    args: &EvaluateArgs,
) -> Result<(), CliError> {
    let mut seen = HashSet::new();
    let mut problems = Vec::new();
    for (index, record) in dataset.iter().enumerate() {
        let line = index + 1;
        if !seen.insert(record.id.as_str()) {
            problems.push(format!(
                "{}:{line}: duplicate example id {:?}",
                args.dataset.display(),
                record.id
            ));
        }
        for violation in validate_record(record, &cfg.normalization) {
            problems.push(format!(
                "{}:{line}: {violation}",
                args.dataset.display()
            ));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Schema(problems.join("\n")))
    }
}

pub fn build_scorer(cfg: &EvalConfig) -> Result<TextScorer, CliError> {
    let provider = match cfg.similarity.backend {
        SimilarityBackend::Fallback => None,
        SimilarityBackend::Remote => Some(Arc::new(
            HttpEmbeddingProvider::from_env().map_err(|e| CliError::Provider(e.to_string()))?,
        ) as Arc<dyn aspectmatch::similarity::EmbeddingProvider>),
    };
    TextScorer::new(cfg.similarity.clone(), provider).map_err(map_similarity_error)
}

fn map_metric_error(e: MetricError) -> CliError {
    match e {
        MetricError::Similarity(err) => map_similarity_error(err),
        MetricError::Config(m) | MetricError::Input(m) => CliError::Schema(m),
    }
}

fn map_similarity_error(e: SimilarityError) -> CliError {
    match e {
        SimilarityError::Provider(err) => CliError::Provider(err.to_string()),
        other => CliError::Schema(other.to_string()),
    }
}
