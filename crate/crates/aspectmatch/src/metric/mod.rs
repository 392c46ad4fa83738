//! The ITM-IoU metric: per-triplet aspect scoring, thresholded one-to-one
//! matching, per-example intersection-over-union, and corpus aggregation.

mod correlation;
mod engine;

pub use correlation::{correlate_with_human, Correlation};
pub use engine::{
    aspect_score, correction_score, detection_score, evaluate_corpus, itm_iou_example,
    match_and_score, Bucket, CorpusReport, ExampleResult, ExampleScore, MatchOutcome,
    WarningCounts,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Task;
use crate::similarity::{SimilarityConfig, SimilarityError};
use crate::text::NormalizationPolicy;

/// Weights of the class / detection / correction components of an aspect
/// score. Must be non-negative and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub w_ca: f64,
    pub w_de: f64,
    pub w_co: f64,
}

impl MetricWeights {
    pub fn new(w_ca: f64, w_de: f64, w_co: f64) -> Result<Self, MetricError> {
        let w = Self { w_ca, w_de, w_co };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.w_ca < 0.0 || self.w_de < 0.0 || self.w_co < 0.0 {
            return Err(MetricError::Config("weights must be non-negative".into()));
        }
        let sum = self.w_ca + self.w_de + self.w_co;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricError::Config(format!(
                "weights must sum to 1 (got {sum})"
            )));
        }
        Ok(())
    }
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            w_ca: 0.2,
            w_de: 0.4,
            w_co: 0.4,
        }
    }
}

/// Every constant of the metric, serialized into each report so results are
/// self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub task: Task,
    pub weights: MetricWeights,
    /// Matching threshold: a prediction/gold pair counts only when its
    /// aspect score reaches this value.
    pub threshold: f64,
    pub chrf_order: usize,
    pub chrf_beta: f64,
    pub chrf_remove_whitespace: bool,
    pub normalization: NormalizationPolicy,
    pub similarity: SimilarityConfig,
    /// Compatibility switch: score every prediction against its best gold
    /// independently (several predictions may claim the same gold; the IoU
    /// factor is clipped to 1). Off by default; the bounded one-to-one
    /// assignment is the primary definition.
    pub unbounded_matching: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            task: Task::Mdc,
            weights: MetricWeights::default(),
            threshold: 0.55,
            chrf_order: 6,
            chrf_beta: 1.0,
            chrf_remove_whitespace: true,
            normalization: NormalizationPolicy::default(),
            similarity: SimilarityConfig::default(),
            unbounded_matching: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        self.weights.validate()?;
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(MetricError::Config(format!(
                "threshold must be in (0, 1], got {}",
                self.threshold
            )));
        }
        if self.chrf_order < 1 {
            return Err(MetricError::Config("chrf_order must be >= 1".into()));
        }
        if self.chrf_beta <= 0.0 {
            return Err(MetricError::Config("chrf_beta must be > 0".into()));
        }
        self.similarity.validate()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric configuration error: {0}")]
    Config(String),
    #[error("metric input error: {0}")]
    Input(String),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}
