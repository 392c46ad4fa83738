//! The correlate subcommand: per-example metric scores vs human ratings.

use std::collections::BTreeMap;

use aspectmatch::metric::{correlate_with_human, Correlation};
use serde::{Deserialize, Serialize};

use super::evaluate::ReportFile;
use crate::io::{read_json, read_jsonl, write_json_atomic};
use crate::{CliError, CorrelateArgs};

#[derive(Deserialize)]
struct HumanScore {
    id: String,
    score: f64,
}

#[derive(Serialize)]
struct CorrelationSummary {
    #[serde(flatten)]
    correlation: Correlation,
    scores_file: String,
    human_file: String,
}

pub fn run(args: CorrelateArgs) -> Result<u8, CliError> {
    let report: ReportFile = read_json(&args.scores)?;
    if report.report.per_example.is_empty() {
        return Err(CliError::Schema(format!(
            "{} has no per-example results; re-run evaluate with --per-example",
            args.scores.display()
        )));
    }
    let metric: BTreeMap<String, f64> = report
        .report
        .per_example
        .iter()
        .map(|r| (r.id.clone(), r.score.itm_iou))
        .collect();

    let human_rows: Vec<HumanScore> = read_jsonl(&args.human)?;
    for row in &human_rows {
        if !(1.0..=5.0).contains(&row.score) {
            return Err(CliError::Schema(format!(
                "human score {} for id {:?} is outside [1, 5]",
                row.score, row.id
            )));
        }
    }
    let human: BTreeMap<String, f64> = human_rows
        .into_iter()
        .map(|r| (r.id, r.score))
        .collect();

    let correlation =
        correlate_with_human(&metric, &human).map_err(|e| CliError::Schema(e.to_string()))?;

    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
    println!(
        "pearson {} spearman {} n {}",
        fmt(correlation.pearson),
        fmt(correlation.spearman),
        correlation.n
    );

    if let Some(out) = &args.out {
        write_json_atomic(
            out,
            &CorrelationSummary {
                correlation,
                scores_file: args.scores.display().to_string(),
                human_file: args.human.display().to_string(),
            },
        )?;
    }
    Ok(0)
}
