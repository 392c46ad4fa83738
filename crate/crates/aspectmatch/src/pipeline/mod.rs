//! Synthetic-mismatch data pipeline: aspect-graph parsing, counterfactual
//! node replacement, caption regeneration, debias filtering, query selection,
//! and retrieval candidate ranking. Every external model sits behind a client
//! contract with scripted in-process doubles, so the whole pipeline runs and
//! tests offline.

mod clients;
mod filter;
mod generate;
mod graph;
mod prompts;
mod queries;
mod rank;

pub use clients::{
    validated_score, ClientError, HttpLlmClient, HttpScorerClient, LlmClient, ScorerClient,
    ScorerKind, ScriptedLlmClient, ScriptedScorerClient,
};
pub use filter::{
    debias_filter, score_gap, FilterCandidate, FilterConfig, FilterOutcome, GapScores,
    RejectReason, ScorePair, ScorerSet,
};
pub use generate::{
    graph_to_caption, parse_caption_to_graph, replace_nodes, PipelineConfig, ReplacementEntry,
    ReplacementLog,
};
pub use graph::{AspectGraph, GraphEdge, GraphNode};
pub use prompts::{fill, PromptTemplates};
pub use queries::{select_queries, tree_depth, RejectedQuery, SelectedQuery, SelectionOutcome};
pub use rank::{rank_candidates, ImageCandidate, RankWeights, RankedCandidate, SizeConstraints};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("pipeline input error: {0}")]
    Input(String),
    #[error("aspect graph validation failed: {0}")]
    GraphValidation(String),
    #[error("client reply could not be interpreted: {0}")]
    MalformedReply(String),
    #[error("replacement for node {node_id} changed POS from {expected} to {got}")]
    PosMismatch {
        node_id: String,
        expected: String,
        got: String,
    },
    #[error("generated caption does not contain node phrase {missing_phrase:?}")]
    CoverageFailure { missing_phrase: String },
}
