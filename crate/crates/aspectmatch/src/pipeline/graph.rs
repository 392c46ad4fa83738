//! Aspect graphs: the intermediate representation captions are decomposed
//! into before counterfactual rewriting.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::text::{normalize, NormalizationPolicy};

/// An atomic phrase of the caption with its part-of-speech tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub phrase: String,
    pub pos_tag: String,
    /// Original phrase when this node was counterfactually replaced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced_from: Option<String>,
}

/// A labeled relationship between two nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    pub relation: String,
}

/// Nodes plus labeled edges. Node ids are unique, edges reference existing
/// nodes, and nodes are atomic: no node phrase strictly contains another
/// node's phrase as a token-boundary substring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl AspectGraph {
    /// Builds a graph, checking every structural invariant.
    pub fn new(nodes: Vec<GraphNode>, edges: Vec<GraphEdge>) -> Result<Self, PipelineError> {
        let graph = Self { nodes, edges };
        graph.validate()?;
        Ok(graph)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.nodes.is_empty() {
            return Err(PipelineError::GraphValidation("graph has no nodes".into()));
        }
        let mut ids = HashSet::new();
        for node in &self.nodes {
            if node.phrase.trim().is_empty() {
                return Err(PipelineError::GraphValidation(format!(
                    "node {:?} has an empty phrase",
                    node.id
                )));
            }
            if !ids.insert(node.id.as_str()) {
                return Err(PipelineError::GraphValidation(format!(
                    "duplicate node id {:?}",
                    node.id
                )));
            }
        }
        for edge in &self.edges {
            for endpoint in [&edge.source, &edge.target] {
                if !ids.contains(endpoint.as_str()) {
                    return Err(PipelineError::GraphValidation(format!(
                        "edge references unknown node {endpoint:?}"
                    )));
                }
            }
        }
        // atomicity: no phrase strictly contains another at token boundaries
        let tokens: Vec<Vec<String>> = self
            .nodes
            .iter()
            .map(|n| phrase_tokens(&n.phrase))
            .collect();
        for (i, a) in tokens.iter().enumerate() {
            for (j, b) in tokens.iter().enumerate() {
                if i != j && a != b && contains_token_seq(a, b) {
                    return Err(PipelineError::GraphValidation(format!(
                        "node {:?} is not atomic: its phrase contains the phrase of node {:?}",
                        self.nodes[i].id, self.nodes[j].id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

/// Lowercased, punctuation-stripped whitespace tokens used for atomicity and
/// caption-coverage checks.
pub(crate) fn phrase_tokens(phrase: &str) -> Vec<String> {
    let policy = NormalizationPolicy {
        strip_punctuation: true,
        ..NormalizationPolicy::default()
    };
    normalize(phrase, &policy)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Whether `needle` occurs as a contiguous token subsequence of `haystack`.
pub(crate) fn contains_token_seq(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, phrase: &str, pos: &str) -> GraphNode {
        GraphNode {
            id: id.into(),
            phrase: phrase.into(),
            pos_tag: pos.into(),
            replaced_from: None,
        }
    }

    fn edge(s: &str, t: &str, r: &str) -> GraphEdge {
        GraphEdge {
            source: s.into(),
            target: t.into(),
            relation: r.into(),
        }
    }

    #[test]
    fn valid_graph_passes() {
        let g = AspectGraph::new(
            vec![node("n1", "a dog", "NOUN"), node("n2", "a ball", "NOUN")],
            vec![edge("n1", "n2", "chasing")],
        );
        assert!(g.is_ok());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let g = AspectGraph::new(vec![node("n1", "a dog", "NOUN"), node("n1", "a cat", "NOUN")], vec![]);
        assert!(matches!(g, Err(PipelineError::GraphValidation(_))));
    }

    #[test]
    fn dangling_edge_rejected() {
        let g = AspectGraph::new(vec![node("n1", "a dog", "NOUN")], vec![edge("n1", "nope", "x")]);
        assert!(g.is_err());
    }

    #[test]
    fn containing_phrase_violates_atomicity() {
        let g = AspectGraph::new(
            vec![node("n1", "a big dog", "NOUN"), node("n2", "big dog", "NOUN")],
            vec![],
        );
        assert!(g.is_err());
        // equal phrases do not count as strict containment
        let g = AspectGraph::new(
            vec![node("n1", "a dog", "NOUN"), node("n2", "a dog", "NOUN")],
            vec![],
        );
        assert!(g.is_ok());
        // sharing a word without token-boundary containment is fine
        let g = AspectGraph::new(
            vec![node("n1", "a doghouse", "NOUN"), node("n2", "dog", "NOUN")],
            vec![],
        );
        assert!(g.is_ok());
    }
}
