//! Counterfactual caption generation: caption -> aspect graph -> node
//! replacement -> new caption, all through an LLM client.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clients::LlmClient;
use super::graph::{contains_token_seq, phrase_tokens, AspectGraph, GraphEdge, GraphNode};
use super::prompts::{fill, PromptTemplates};
use super::PipelineError;

/// Knobs for the LLM-driven stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Retries after a malformed or invalid reply (transport retries are the
    /// client's own concern).
    pub max_reply_retries: u32,
    pub max_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_reply_retries: 2,
            max_tokens: 512,
        }
    }
}

#[derive(Deserialize)]
struct GraphReply {
    nodes: Vec<GraphNodeReply>,
    #[serde(default)]
    edges: Vec<GraphEdgeReply>,
}

#[derive(Deserialize)]
struct GraphNodeReply {
    id: String,
    phrase: String,
    pos: String,
}

#[derive(Deserialize)]
struct GraphEdgeReply {
    source: String,
    target: String,
    relation: String,
}

/// Extracts the outermost JSON object from a reply that may be wrapped in
/// prose or code fences.
fn json_payload(reply: &str) -> Option<&str> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    (end > start).then(|| &reply[start..=end])
}

/// Decomposes a caption into an aspect graph via the LLM client. Malformed
/// or invariant-violating replies are retried a bounded number of times.
pub fn parse_caption_to_graph(
    caption: &str,
    llm: &dyn LlmClient,
    templates: &PromptTemplates,
    cfg: &PipelineConfig,
) -> Result<AspectGraph, PipelineError> {
    if caption.trim().is_empty() {
        return Err(PipelineError::Input("caption is empty".into()));
    }
    let prompt = fill(&templates.graph_parse, &[("caption", caption)]);
    let mut last_error = None;
    for _ in 0..=cfg.max_reply_retries {
        let reply = llm.complete(&prompt, cfg.max_tokens)?;
        match graph_from_reply(&reply) {
            Ok(graph) => return Ok(graph),
            Err(e) => last_error = Some(e),
        }
    }
    Err(last_error.expect("at least one attempt"))
}

fn graph_from_reply(reply: &str) -> Result<AspectGraph, PipelineError> {
    let payload = json_payload(reply)
        .ok_or_else(|| PipelineError::MalformedReply("no JSON object in reply".into()))?;
    let parsed: GraphReply = serde_json::from_str(payload)
        .map_err(|e| PipelineError::MalformedReply(format!("graph reply: {e}")))?;
    let nodes = parsed
        .nodes
        .into_iter()
        .map(|n| GraphNode {
            id: n.id,
            phrase: n.phrase,
            pos_tag: n.pos,
            replaced_from: None,
        })
        .collect();
    let edges = parsed
        .edges
        .into_iter()
        .map(|e| GraphEdge {
            source: e.source,
            target: e.target,
            relation: e.relation,
        })
        .collect();
    AspectGraph::new(nodes, edges)
}

/// One node replacement as recorded in the log. The part-of-speech tag never
/// changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementEntry {
    pub node_id: String,
    pub original_phrase: String,
    pub original_pos: String,
    pub new_phrase: String,
    pub new_pos: String,
}

pub type ReplacementLog = Vec<ReplacementEntry>;

#[derive(Deserialize)]
struct ReplacementReply {
    phrase: String,
    pos: String,
}

/// Replaces `k` uniformly chosen nodes with counterfactual phrases of the
/// same part-of-speech tag. Structure is preserved: ids, edges, node count,
/// and node order are untouched. Deterministic for a fixed seed and client.
pub fn replace_nodes(
    graph: &AspectGraph,
    k: usize,
    llm: &dyn LlmClient,
    templates: &PromptTemplates,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(AspectGraph, ReplacementLog), PipelineError> {
    let limit = graph.nodes.len().min(3);
    if k < 1 || k > limit {
        return Err(PipelineError::Input(format!(
            "replacement count {k} out of range 1..={limit} for a {}-node graph",
            graph.nodes.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..graph.nodes.len()).collect();
    indices.shuffle(&mut rng);
    let mut selected: Vec<usize> = indices.into_iter().take(k).collect();
    selected.sort_unstable();

    let graph_json = serde_json::to_string(graph).expect("graph serializes");
    let caption_hint: Vec<String> = graph.nodes.iter().map(|n| n.phrase.clone()).collect();
    let caption_hint = caption_hint.join(", ");

    let mut result = graph.clone();
    let mut log = Vec::with_capacity(k);
    for index in selected {
        let node = &graph.nodes[index];
        let prompt = fill(
            &templates.node_replace,
            &[
                ("caption", caption_hint.as_str()),
                ("graph", graph_json.as_str()),
                ("node_phrase", node.phrase.as_str()),
                ("pos", node.pos_tag.as_str()),
            ],
        );
        let mut outcome = None;
        for _ in 0..=cfg.max_reply_retries {
            let reply = llm.complete(&prompt, cfg.max_tokens)?;
            match replacement_from_reply(&reply, node) {
                Ok(entry) => {
                    outcome = Some(Ok(entry));
                    break;
                }
                Err(e) => outcome = Some(Err(e)),
            }
        }
        let entry = outcome.expect("at least one attempt")?;
        result.nodes[index].phrase = entry.new_phrase.clone();
        result.nodes[index].replaced_from = Some(entry.original_phrase.clone());
        log.push(entry);
    }
    Ok((result, log))
}

fn replacement_from_reply(
    reply: &str,
    node: &GraphNode,
) -> Result<ReplacementEntry, PipelineError> {
    let payload = json_payload(reply)
        .ok_or_else(|| PipelineError::MalformedReply("no JSON object in reply".into()))?;
    let parsed: ReplacementReply = serde_json::from_str(payload)
        .map_err(|e| PipelineError::MalformedReply(format!("replacement reply: {e}")))?;
    let phrase = parsed.phrase.trim().to_string();
    if phrase.is_empty() {
        return Err(PipelineError::MalformedReply(
            "replacement phrase is empty".into(),
        ));
    }
    if !parsed.pos.trim().eq_ignore_ascii_case(node.pos_tag.trim()) {
        return Err(PipelineError::PosMismatch {
            node_id: node.id.clone(),
            expected: node.pos_tag.clone(),
            got: parsed.pos.trim().to_string(),
        });
    }
    Ok(ReplacementEntry {
        node_id: node.id.clone(),
        original_phrase: node.phrase.clone(),
        original_pos: node.pos_tag.clone(),
        new_phrase: phrase,
        new_pos: node.pos_tag.clone(),
    })
}

/// Linearizes a graph back into a caption via the LLM client. The reply must
/// contain every node phrase at a token boundary; failing replies are retried
/// and then reported as a coverage failure.
pub fn graph_to_caption(
    graph: &AspectGraph,
    llm: &dyn LlmClient,
    templates: &PromptTemplates,
    cfg: &PipelineConfig,
) -> Result<String, PipelineError> {
    graph.validate()?;
    let graph_json = serde_json::to_string(graph).expect("graph serializes");
    let prompt = fill(&templates.caption_gen, &[("graph", graph_json.as_str())]);
    let mut last_error = None;
    for _ in 0..=cfg.max_reply_retries {
        let reply = llm.complete(&prompt, cfg.max_tokens)?;
        let caption = reply.trim().to_string();
        match check_coverage(graph, &caption) {
            Ok(()) if !caption.is_empty() => return Ok(caption),
            Ok(()) => {
                last_error = Some(PipelineError::MalformedReply("empty caption reply".into()))
            }
            Err(e) => last_error = Some(e),
        }
    }
    Err(last_error.expect("at least one attempt"))
}

fn check_coverage(graph: &AspectGraph, caption: &str) -> Result<(), PipelineError> {
    let caption_tokens = phrase_tokens(caption);
    for node in &graph.nodes {
        let node_tokens = phrase_tokens(&node.phrase);
        if !contains_token_seq(&caption_tokens, &node_tokens) {
            return Err(PipelineError::CoverageFailure {
                missing_phrase: node.phrase.clone(),
            });
        }
    }
    Ok(())
}
