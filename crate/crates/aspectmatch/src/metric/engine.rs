//! Scoring and matching machinery behind the metric.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalConfig, MetricError};
use crate::chrf::chrf_with_options;
use crate::model::{
    parse_prediction_text, AspectTriplet, ExampleRecord, PredictionInput, PredictionRecord, Task,
    TripletSet,
};
use crate::similarity::TextScorer;
use crate::text::exact_match;

/// Combined phrase-detection score: the mean of the semantic similarity and
/// the character n-gram F-score of the two phrases.
pub fn detection_score(
    predicted: &str,
    gold: &str,
    cfg: &EvalConfig,
    scorer: &TextScorer,
) -> Result<f64, MetricError> {
    let semantic = scorer.score(predicted, gold)?;
    let lexical = chrf_with_options(
        predicted,
        gold,
        cfg.chrf_order,
        cfg.chrf_beta,
        &cfg.normalization,
        cfg.chrf_remove_whitespace,
    );
    Ok((semantic + lexical) / 2.0)
}

/// Correction quality: semantic similarity only (corrections are open-ended
/// generations, so no character-level component).
pub fn correction_score(
    predicted: &str,
    gold: &str,
    _cfg: &EvalConfig,
    scorer: &TextScorer,
) -> Result<f64, MetricError> {
    Ok(scorer.score(predicted, gold)?)
}

/// Weighted per-pair aspect score.
///
/// MD&C: `w_ca*EM(class) + w_de*detection + w_co*correction`. MD has no
/// correction component, so the correction weight folds into detection:
/// `w_ca*EM(class) + (w_de+w_co)*detection`, keeping the maximum at 1.
pub fn aspect_score(
    predicted: &AspectTriplet,
    gold: &AspectTriplet,
    cfg: &EvalConfig,
    scorer: &TextScorer,
) -> Result<f64, MetricError> {
    let em = if exact_match(
        predicted.class.canonical(),
        gold.class.canonical(),
        &cfg.normalization,
    ) {
        1.0
    } else {
        0.0
    };
    let det = detection_score(&predicted.phrase, &gold.phrase, cfg, scorer)?;
    let w = &cfg.weights;
    let score = match cfg.task {
        Task::Md => w.w_ca * em + (w.w_de + w.w_co) * det,
        Task::Mdc => {
            let corr = correction_score(
                predicted.correction.as_deref().unwrap_or(""),
                gold.correction.as_deref().unwrap_or(""),
                cfg,
                scorer,
            )?;
            w.w_ca * em + w.w_de * det + w.w_co * corr
        }
    };
    Ok(score.clamp(0.0, 1.0))
}

/// Result of matching a prediction set against a gold set.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// One score per prediction in canonical order; unmatched predictions
    /// score 0.
    pub scores: Vec<f64>,
    /// Number of accepted prediction/gold pairs.
    pub matched: usize,
}

/// Matches predictions to gold triplets at the configured threshold.
///
/// Default mode: greedy one-to-one assignment in descending score order (ties
/// broken by canonical prediction index, then gold index); each side is
/// consumed at most once so `matched <= min(|P|, |G|)`. Unbounded mode scores
/// each prediction against its single best gold independently.
pub fn match_and_score(
    predictions: &TripletSet,
    gold: &TripletSet,
    cfg: &EvalConfig,
    scorer: &TextScorer,
) -> Result<MatchOutcome, MetricError> {
    let p = predictions.as_slice();
    let g = gold.as_slice();
    let mut scores = vec![0.0; p.len()];
    if p.is_empty() || g.is_empty() {
        return Ok(MatchOutcome { scores, matched: 0 });
    }

    let mut matrix = Vec::with_capacity(p.len() * g.len());
    for (i, pred) in p.iter().enumerate() {
        for (j, gt) in g.iter().enumerate() {
            matrix.push((aspect_score(pred, gt, cfg, scorer)?, i, j));
        }
    }

    let mut matched = 0;
    if cfg.unbounded_matching {
        for (i, pred_scores) in matrix.chunks(g.len()).enumerate() {
            let best = pred_scores
                .iter()
                .map(|(s, _, _)| *s)
                .fold(f64::NEG_INFINITY, f64::max);
            if best >= cfg.threshold {
                scores[i] = best;
                matched += 1;
            }
        }
    } else {
        matrix.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("aspect scores are finite")
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut pred_used = vec![false; p.len()];
        let mut gold_used = vec![false; g.len()];
        for (score, i, j) in matrix {
            if score < cfg.threshold {
                break;
            }
            if pred_used[i] || gold_used[j] {
                continue;
            }
            pred_used[i] = true;
            gold_used[j] = true;
            scores[i] = score;
            matched += 1;
        }
    }
    Ok(MatchOutcome { scores, matched })
}

/// Per-example metric outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    /// Score of each prediction in canonical order (0 for unmatched).
    pub aspect_scores: Vec<f64>,
    pub matched: usize,
    /// `|P| + |G| - matched`.
    pub union: usize,
    pub itm_iou: f64,
}

/// Per-example score for one example: the mean aspect score of the
/// predictions times the intersection-over-union of the matched sets.
///
/// Both sets empty is perfect agreement on "no mismatch" (1.0); exactly one
/// empty scores 0.
pub fn itm_iou_example(
    predictions: &TripletSet,
    gold: &TripletSet,
    cfg: &EvalConfig,
    scorer: &TextScorer,
) -> Result<ExampleScore, MetricError> {
    if predictions.is_empty() && gold.is_empty() {
        return Ok(ExampleScore {
            aspect_scores: Vec::new(),
            matched: 0,
            union: 0,
            itm_iou: 1.0,
        });
    }
    if predictions.is_empty() || gold.is_empty() {
        return Ok(ExampleScore {
            aspect_scores: vec![0.0; predictions.len()],
            matched: 0,
            union: predictions.len() + gold.len(),
            itm_iou: 0.0,
        });
    }
    let outcome = match_and_score(predictions, gold, cfg, scorer)?;
    let mean = outcome.scores.iter().sum::<f64>() / outcome.scores.len() as f64;
    let union = predictions.len() + gold.len() - outcome.matched.min(predictions.len() + gold.len());
    let iou_factor = if cfg.unbounded_matching {
        // several predictions may claim one gold; clip the factor at 1
        (outcome.matched as f64 / union.max(1) as f64).min(1.0)
    } else {
        outcome.matched as f64 / union as f64
    };
    Ok(ExampleScore {
        aspect_scores: outcome.scores,
        matched: outcome.matched,
        union,
        itm_iou: (mean * iou_factor).clamp(0.0, 1.0),
    })
}

/// One evaluated example as it appears in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub id: String,
    #[serde(flatten)]
    pub score: ExampleScore,
    pub asserted_none: bool,
    pub unparseable: bool,
    pub missing_prediction: bool,
    pub parse_warnings: usize,
}

/// Mean score and population of one breakdown bucket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub mean_itm_iou: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarningCounts {
    /// Examples with no prediction line (scored as empty sets).
    pub missing_prediction: usize,
    /// Raw predictions from which nothing could be extracted.
    pub unparseable: usize,
    /// Predictions that asserted "None".
    pub asserted_none: usize,
    /// Skipped groups and collapsed duplicates across all predictions.
    pub parse_warnings: usize,
}

impl WarningCounts {
    pub fn total(&self) -> usize {
        self.missing_prediction + self.unparseable + self.parse_warnings
    }
}

/// Corpus-level report: the overall mean, per-dimension breakdowns, and the
/// configuration echo that makes a run reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub overall_itm_iou: f64,
    pub example_count: usize,
    /// Mean over the examples whose gold set contains at least one triplet
    /// of the class (buckets overlap when an example mixes classes).
    pub by_class: BTreeMap<String, Bucket>,
    pub by_source: BTreeMap<String, Bucket>,
    pub by_gold_count: BTreeMap<String, Bucket>,
    pub warnings: WarningCounts,
    pub config: EvalConfig,
    pub provider: String,
    pub per_example: Vec<ExampleResult>,
}

/// Evaluates a whole dataset against its predictions.
///
/// Raw predictions are parsed tolerantly; a missing prediction scores as an
/// empty set and is surfaced as a warning. A prediction whose id does not
/// resolve to any example is an input error. Examples are scored
/// independently across `workers` threads; the outcome is deterministic
/// regardless of the worker count.
pub fn evaluate_corpus(
    dataset: &[ExampleRecord],
    predictions: &[PredictionRecord],
    cfg: &EvalConfig,
    scorer: &TextScorer,
    workers: usize,
) -> Result<CorpusReport, MetricError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(MetricError::Input("dataset is empty".into()));
    }
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    for pred in predictions {
        if by_id.insert(pred.id.as_str(), pred).is_some() {
            return Err(MetricError::Input(format!(
                "duplicate prediction id {:?}",
                pred.id
            )));
        }
    }
    let known: HashMap<&str, ()> = dataset.iter().map(|e| (e.id.as_str(), ())).collect();
    for pred in predictions {
        if !known.contains_key(pred.id.as_str()) {
            return Err(MetricError::Input(format!(
                "prediction id {:?} does not resolve to any example",
                pred.id
            )));
        }
    }

    let evaluate_one = |example: &ExampleRecord| -> Result<ExampleResult, MetricError> {
        let (set, asserted_none, unparseable, missing, parse_warnings) =
            match by_id.get(example.id.as_str()) {
                Some(pred) => match &pred.input {
                    PredictionInput::Raw(raw) => {
                        let parsed = parse_prediction_text(raw, cfg.task);
                        (
                            parsed.triplets,
                            parsed.asserted_none,
                            parsed.unparseable,
                            false,
                            parsed.warnings.len(),
                        )
                    }
                    PredictionInput::Triplets(set) => (set.clone(), false, false, false, 0),
                },
                // missing predictions score as unparseable-empty
                None => (TripletSet::empty(), false, true, true, 0),
            };
        let score = itm_iou_example(&set, &example.gold, cfg, scorer)?;
        Ok(ExampleResult {
            id: example.id.clone(),
            score,
            asserted_none,
            unparseable,
            missing_prediction: missing,
            parse_warnings,
        })
    };

    let per_example: Vec<ExampleResult> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| MetricError::Input(format!("cannot build worker pool: {e}")))?;
        pool.install(|| {
            dataset
                .par_iter()
                .map(evaluate_one)
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        dataset
            .iter()
            .map(evaluate_one)
            .collect::<Result<Vec<_>, _>>()?
    };

    let overall_itm_iou =
        per_example.iter().map(|r| r.score.itm_iou).sum::<f64>() / per_example.len() as f64;

    let mut warnings = WarningCounts::default();
    for r in &per_example {
        warnings.missing_prediction += r.missing_prediction as usize;
        warnings.unparseable += (r.unparseable && !r.missing_prediction) as usize;
        warnings.asserted_none += r.asserted_none as usize;
        warnings.parse_warnings += r.parse_warnings;
    }

    let mut by_class: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut by_source: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut by_gold_count: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (example, result) in dataset.iter().zip(&per_example) {
        let v = result.score.itm_iou;
        by_source
            .entry(example.source.name().to_string())
            .or_default()
            .push(v);
        by_gold_count
            .entry(example.gold.len().to_string())
            .or_default()
            .push(v);
        let mut classes: Vec<&str> = example.gold.iter().map(|t| t.class.canonical()).collect();
        classes.sort_unstable();
        classes.dedup();
        for class in classes {
            by_class.entry(class.to_string()).or_default().push(v);
        }
    }
    let to_buckets = |m: BTreeMap<String, Vec<f64>>| -> BTreeMap<String, Bucket> {
        m.into_iter()
            .map(|(k, vs)| {
                let mean = vs.iter().sum::<f64>() / vs.len() as f64;
                (
                    k,
                    Bucket {
                        mean_itm_iou: mean,
                        count: vs.len(),
                    },
                )
            })
            .collect()
    };

    Ok(CorpusReport {
        overall_itm_iou,
        example_count: per_example.len(),
        by_class: to_buckets(by_class),
        by_source: to_buckets(by_source),
        by_gold_count: to_buckets(by_gold_count),
        warnings,
        config: cfg.clone(),
        provider: scorer.provider_identity(),
        per_example,
    })
}
