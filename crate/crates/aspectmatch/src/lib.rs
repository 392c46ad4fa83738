//! Aspect-based image-text mismatch analysis.
//!
//! The crate has three layers:
//!
//! - **Model and metrics**: canonical aspect triplets, a tolerant parser for
//!   free-form model output ([`model`]), character-level string metrics
//!   ([`text`], [`chrf`]), embedding-based similarity with an offline
//!   fallback ([`similarity`]), and the ITM-IoU evaluation engine
//!   ([`metric`]).
//! - **Data pipeline**: aspect-graph parsing and counterfactual node
//!   replacement over pluggable LLM/scorer clients, debias filtering, query
//!   selection, and retrieval candidate ranking ([`pipeline`]).
//! - **Alignment loop**: the iterative generate, detect, edit orchestration
//!   ([`autoalign`]).

pub mod autoalign;
pub mod chrf;
pub mod metric;
pub mod model;
pub mod pipeline;
pub mod similarity;
pub mod text;

pub use chrf::{char_ngram_profile, chrf, NgramProfile};
pub use model::{
    parse_prediction_text, serialize_triplet_set, validate_record, AspectClass, AspectTriplet,
    DataSource, ExampleRecord, ParseWarning, ParsedPrediction, PredictionInput, PredictionRecord,
    Task, TripletSet, Violation,
};
pub use similarity::{
    bert_score_f1, fallback_similarity, EmbeddingProvider, HttpEmbeddingProvider,
    MockEmbeddingProvider, ProviderCapabilities, ProviderError, SimilarityBackend,
    SimilarityConfig, SimilarityError, TextScorer, TokenEmbeddingSequence,
};
pub use text::{exact_match, normalize, NormalizationPolicy};
