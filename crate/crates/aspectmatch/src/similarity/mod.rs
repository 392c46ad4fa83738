//! Semantic text similarity: greedy token-matching F1 over a pluggable
//! embedding provider, with a deterministic character-trigram fallback so the
//! whole metric pipeline runs offline.

mod provider;

pub use provider::{
    HttpEmbeddingProvider, MockEmbeddingProvider, ProviderCapabilities, ProviderError,
};

use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chrf::char_ngram_profile;
use crate::text::{normalize, NormalizationPolicy};

/// Token-level embeddings for one text: one vector per token, all of the same
/// dimension. Providers must never emit all-zero vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingSequence {
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl TokenEmbeddingSequence {
    pub fn new(tokens: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self, SimilarityError> {
        if vectors.is_empty() || tokens.len() != vectors.len() {
            return Err(SimilarityError::Config(format!(
                "token/vector count mismatch or empty sequence ({} tokens, {} vectors)",
                tokens.len(),
                vectors.len()
            )));
        }
        let dim = vectors[0].len();
        if dim == 0 {
            return Err(SimilarityError::Config("zero-dimensional vectors".into()));
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(SimilarityError::Config(format!(
                    "inconsistent vector dimensions ({} vs {dim})",
                    v.len()
                )));
            }
            if v.iter().all(|x| *x == 0.0) {
                return Err(SimilarityError::Config("all-zero token vector".into()));
            }
        }
        Ok(Self { tokens, vectors })
    }

    pub fn dimension(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty sequences
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Which similarity backend scores texts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityBackend {
    /// Deterministic in-process character-trigram cosine; needs no model.
    Fallback,
    /// Token embeddings from an external provider, scored greedily.
    Remote,
}

/// Similarity scoring options, echoed verbatim into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityConfig {
    pub backend: SimilarityBackend,
    /// Rescale greedy-matching F1 by `(s - b) / (1 - b)` with the explicit
    /// baseline `b` below, then clamp to [0, 1]. Off by default: the raw
    /// score is the literal reading of the metric definition.
    pub rescale: bool,
    pub rescale_baseline: Option<f64>,
    /// Clamp negative cosines to 0 so downstream weighted sums stay in [0, 1].
    pub clamp_negative: bool,
    /// Accepted in the schema for forward compatibility; enabling it is a
    /// configuration error (no backend computes corpus IDF statistics).
    pub idf_weighting: bool,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            backend: SimilarityBackend::Fallback,
            rescale: false,
            rescale_baseline: None,
            clamp_negative: true,
            idf_weighting: false,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<(), SimilarityError> {
        if self.idf_weighting {
            return Err(SimilarityError::Config(
                "idf_weighting is not supported by any backend".into(),
            ));
        }
        if self.rescale {
            match self.rescale_baseline {
                Some(b) if (0.0..1.0).contains(&b) => {}
                Some(b) => {
                    return Err(SimilarityError::Config(format!(
                        "rescale_baseline must be in [0, 1), got {b}"
                    )))
                }
                None => {
                    return Err(SimilarityError::Config(
                        "rescale requires rescale_baseline".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("similarity configuration error: {0}")]
    Config(String),
    #[error("similarity precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

fn cosine(a: &[f64], b: &[f64], clamp_negative: bool) -> f64 {
    if a == b {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let c = (dot / (na * nb)).min(1.0);
    if clamp_negative {
        c.max(0.0)
    } else {
        c.max(-1.0)
    }
}

/// Greedy token-matching F1 between two embedded texts.
///
/// Precision is the mean over candidate tokens of the best cosine against any
/// reference token; recall swaps the roles; F1 combines them (0 when both
/// are 0). Symmetric in its arguments.
pub fn bert_score_f1(
    candidate: &TokenEmbeddingSequence,
    reference: &TokenEmbeddingSequence,
    cfg: &SimilarityConfig,
) -> Result<f64, SimilarityError> {
    if candidate.dimension() != reference.dimension() {
        return Err(SimilarityError::Config(format!(
            "embedding dimension mismatch: {} vs {}",
            candidate.dimension(),
            reference.dimension()
        )));
    }
    let best = |from: &TokenEmbeddingSequence, to: &TokenEmbeddingSequence| -> f64 {
        let sum: f64 = from
            .vectors()
            .iter()
            .map(|u| {
                to.vectors()
                    .iter()
                    .map(|v| cosine(u, v, cfg.clamp_negative))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum();
        sum / from.len() as f64
    };
    let p = best(candidate, reference);
    let r = best(reference, candidate);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Ok(apply_rescale(f1, cfg))
}

fn apply_rescale(score: f64, cfg: &SimilarityConfig) -> f64 {
    if cfg.rescale {
        let b = cfg.rescale_baseline.unwrap_or(0.0);
        ((score - b) / (1.0 - b)).clamp(0.0, 1.0)
    } else {
        score
    }
}

/// Deterministic offline similarity: cosine between character-trigram count
/// vectors of the normalized, whitespace-stripped texts. For texts shorter
/// than three characters the order adapts down so identical short strings
/// still score 1. Both empty yields 1, exactly one empty yields 0.
pub fn fallback_similarity(a: &str, b: &str) -> f64 {
    let policy = NormalizationPolicy::default();
    let x: String = normalize(a, &policy).chars().filter(|c| !c.is_whitespace()).collect();
    let y: String = normalize(b, &policy).chars().filter(|c| !c.is_whitespace()).collect();
    if x.is_empty() && y.is_empty() {
        return 1.0;
    }
    if x.is_empty() || y.is_empty() {
        return 0.0;
    }
    if x == y {
        return 1.0;
    }
    let n = 3.min(x.chars().count()).min(y.chars().count());
    let no_ws = NormalizationPolicy {
        lowercase: false,
        collapse_whitespace: false,
        strip_punctuation: false,
        unicode_nfc: false,
    };
    let px = char_ngram_profile(&x, n, &no_ws);
    let py = char_ngram_profile(&y, n, &no_ws);
    let dot: f64 = px.iter().map(|(g, c)| (c * py.count(g)) as f64).sum();
    let nx: f64 = px.iter().map(|(_, c)| (c * c) as f64).sum::<f64>().sqrt();
    let ny: f64 = py.iter().map(|(_, c)| (c * c) as f64).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    (dot / (nx * ny)).clamp(0.0, 1.0)
}

type ScoreCache = DashMap<(String, String), f64>;

/// Scores text pairs under a fixed configuration, memoizing results for the
/// lifetime of the scorer (one evaluation run).
pub struct TextScorer {
    cfg: SimilarityConfig,
    provider: Option<Arc<dyn provider::EmbeddingProvider>>,
    serialize_requests: Option<std::sync::Mutex<()>>,
    scores: ScoreCache,
    embeddings: DashMap<String, Arc<TokenEmbeddingSequence>>,
}

pub use provider::EmbeddingProvider;

impl TextScorer {
    pub fn new(
        cfg: SimilarityConfig,
        provider: Option<Arc<dyn provider::EmbeddingProvider>>,
    ) -> Result<Self, SimilarityError> {
        cfg.validate()?;
        let serialize_requests = match (&cfg.backend, &provider) {
            (SimilarityBackend::Remote, None) => {
                return Err(SimilarityError::Config(
                    "remote backend requires an embedding provider".into(),
                ))
            }
            (SimilarityBackend::Remote, Some(p)) => {
                if p.capabilities().concurrent_batches {
                    None
                } else {
                    Some(std::sync::Mutex::new(()))
                }
            }
            _ => None,
        };
        Ok(Self {
            cfg,
            provider,
            serialize_requests,
            scores: DashMap::new(),
            embeddings: DashMap::new(),
        })
    }

    /// Offline scorer with the default configuration.
    pub fn offline() -> Self {
        Self::new(SimilarityConfig::default(), None).expect("default config is valid")
    }

    pub fn config(&self) -> &SimilarityConfig {
        &self.cfg
    }

    /// Provider identity recorded in reports.
    pub fn provider_identity(&self) -> String {
        match (&self.cfg.backend, &self.provider) {
            (SimilarityBackend::Fallback, _) => "fallback:char-trigram-cosine".to_string(),
            (SimilarityBackend::Remote, Some(p)) => {
                let caps = p.capabilities();
                format!("remote:{}@{}d", caps.name, caps.dimension)
            }
            (SimilarityBackend::Remote, None) => unreachable!("rejected at construction"),
        }
    }

    /// Similarity of two texts in [0, 1] under the configured backend,
    /// memoized per (a, b) pair.
    pub fn score(&self, a: &str, b: &str) -> Result<f64, SimilarityError> {
        let key = (a.to_string(), b.to_string());
        if let Some(hit) = self.scores.get(&key) {
            return Ok(*hit);
        }
        let value = self.score_uncached(a, b)?;
        self.scores.insert(key, value);
        Ok(value)
    }

    /// Same computation without consulting or filling the score cache
    /// (embedding lookups are still shared).
    pub fn score_uncached(&self, a: &str, b: &str) -> Result<f64, SimilarityError> {
        let policy = NormalizationPolicy::default();
        let a_empty = normalize(a, &policy).is_empty();
        let b_empty = normalize(b, &policy).is_empty();
        if a_empty && b_empty {
            return Ok(1.0);
        }
        if a_empty || b_empty {
            return Ok(0.0);
        }
        match self.cfg.backend {
            SimilarityBackend::Fallback => Ok(fallback_similarity(a, b)),
            SimilarityBackend::Remote => {
                let ea = self.embed(a)?;
                let eb = self.embed(b)?;
                bert_score_f1(&ea, &eb, &self.cfg)
            }
        }
    }

    fn embed(&self, text: &str) -> Result<Arc<TokenEmbeddingSequence>, SimilarityError> {
        if let Some(hit) = self.embeddings.get(text) {
            return Ok(hit.clone());
        }
        let provider = self.provider.as_ref().expect("remote backend has provider");
        let _guard = self
            .serialize_requests
            .as_ref()
            .map(|m| m.lock().unwrap_or_else(|e| e.into_inner()));
        let mut batch = provider.embed_batch(&[text])?;
        if batch.len() != 1 {
            return Err(ProviderError::Protocol(format!(
                "provider returned {} sequences for 1 text",
                batch.len()
            ))
            .into());
        }
        let seq = Arc::new(batch.remove(0));
        self.embeddings.insert(text.to_string(), seq.clone());
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fallback_locked_fixtures() {
        // frozen from the independent trigram-cosine script
        let cases = [
            ("golden flower", "blond hair", 0.0),
            ("three dogs", "two dogs", 0.33806170189140655),
            ("four kids", "four children", 0.25819888974716115),
            ("a blue bus", "a blue bug", 0.8333333333333335),
        ];
        for (a, b, want) in cases {
            let got = fallback_similarity(a, b);
            assert!(
                (got - want).abs() <= 1e-9,
                "fallback({a:?}, {b:?}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn fallback_edge_rules() {
        assert_eq!(fallback_similarity("blue bus", "blue bus"), 1.0);
        assert_eq!(fallback_similarity("abc", "xyz"), 0.0);
        assert_eq!(fallback_similarity("", ""), 1.0);
        assert_eq!(fallback_similarity("cat", ""), 0.0);
        // shorter than a trigram
        assert_eq!(fallback_similarity("ab", "ab"), 1.0);
        assert_eq!(fallback_similarity("a", "b"), 0.0);
    }

    fn seq(vectors: Vec<Vec<f64>>) -> TokenEmbeddingSequence {
        let tokens = (0..vectors.len()).map(|i| format!("t{i}")).collect();
        TokenEmbeddingSequence::new(tokens, vectors).unwrap()
    }

    #[test]
    fn bert_score_hand_fixture() {
        // cosine matrix computed by hand:
        //   P = (0.8 + 1.0)/2 = 0.9, R = (0.8 + 1.0 + 0.0)/3 = 0.6, F1 = 0.72
        let cand = seq(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let refr = seq(vec![
            vec![0.8, 0.6, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let cfg = SimilarityConfig::default();
        let got = bert_score_f1(&cand, &refr, &cfg).unwrap();
        assert!((got - 0.72).abs() <= 1e-12, "got {got}");
        // symmetric
        let swapped = bert_score_f1(&refr, &cand, &cfg).unwrap();
        assert!((got - swapped).abs() <= 1e-12);
    }

    #[test]
    fn bert_score_identity_and_orthogonal() {
        let cfg = SimilarityConfig::default();
        let a = seq(vec![vec![0.3, 0.4], vec![1.0, 2.0]]);
        assert_eq!(bert_score_f1(&a, &a, &cfg).unwrap(), 1.0);
        let x = seq(vec![vec![1.0, 0.0]]);
        let y = seq(vec![vec![0.0, 1.0]]);
        assert_eq!(bert_score_f1(&x, &y, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn negative_cosines_clamp_by_default() {
        let cfg = SimilarityConfig::default();
        let x = seq(vec![vec![1.0, 0.0]]);
        let y = seq(vec![vec![-1.0, 0.0]]);
        assert_eq!(bert_score_f1(&x, &y, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let cfg = SimilarityConfig::default();
        let x = seq(vec![vec![1.0, 0.0]]);
        let y = seq(vec![vec![1.0, 0.0, 0.0]]);
        assert!(matches!(
            bert_score_f1(&x, &y, &cfg),
            Err(SimilarityError::Config(_))
        ));
    }

    #[test]
    fn sequence_invariants_enforced() {
        assert!(TokenEmbeddingSequence::new(vec![], vec![]).is_err());
        assert!(TokenEmbeddingSequence::new(vec!["a".into()], vec![vec![0.0, 0.0]]).is_err());
        assert!(TokenEmbeddingSequence::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0], vec![1.0, 2.0]]
        )
        .is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimilarityConfig {
            idf_weighting: true,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.idf_weighting = false;
        cfg.rescale = true;
        assert!(cfg.validate().is_err());
        cfg.rescale_baseline = Some(0.85);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn scorer_identity_rule_on_both_backends() {
        let offline = TextScorer::offline();
        assert_eq!(offline.score("a blue bus", "a blue bus").unwrap(), 1.0);

        let provider = Arc::new(MockEmbeddingProvider::hashed(8));
        let cfg = SimilarityConfig {
            backend: SimilarityBackend::Remote,
            ..Default::default()
        };
        let remote = TextScorer::new(cfg, Some(provider)).unwrap();
        assert_eq!(remote.score("a blue bus", "a blue bus").unwrap(), 1.0);
    }

    #[test]
    fn memoization_never_changes_values() {
        let scorer = TextScorer::offline();
        let pairs = [("golden", "blond"), ("two dogs", "three dogs"), ("x", "x")];
        for (a, b) in pairs {
            let cold = scorer.score_uncached(a, b).unwrap();
            let warm1 = scorer.score(a, b).unwrap();
            let warm2 = scorer.score(a, b).unwrap();
            assert_eq!(cold, warm1);
            assert_eq!(warm1, warm2);
        }
    }

    #[test]
    fn remote_backend_requires_provider() {
        let cfg = SimilarityConfig {
            backend: SimilarityBackend::Remote,
            ..Default::default()
        };
        assert!(TextScorer::new(cfg, None).is_err());
    }

    #[test]
    fn scripted_mock_reproduces_hand_fixture() {
        let mut provider = MockEmbeddingProvider::new("scripted", 3);
        provider.insert("a blue bus", vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        provider.insert(
            "a blue bug",
            vec![vec![0.8, 0.6, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        );
        let cfg = SimilarityConfig {
            backend: SimilarityBackend::Remote,
            ..Default::default()
        };
        let scorer = TextScorer::new(cfg, Some(Arc::new(provider))).unwrap();
        let got = scorer.score("a blue bus", "a blue bug").unwrap();
        assert!((got - 0.72).abs() <= 1e-12);
    }
}
