//! Prompt templates with `{placeholder}` substitution. Defaults ship with the
//! crate; any template can be overridden from an editable text file.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::PipelineError;

const GRAPH_PARSE: &str = include_str!("templates/graph_parse.txt");
const NODE_REPLACE: &str = include_str!("templates/node_replace.txt");
const CAPTION_GEN: &str = include_str!("templates/caption_gen.txt");

/// The three prompt templates the generation stage uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub graph_parse: String,
    pub node_replace: String,
    pub caption_gen: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            graph_parse: GRAPH_PARSE.to_string(),
            node_replace: NODE_REPLACE.to_string(),
            caption_gen: CAPTION_GEN.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads `graph_parse.txt`, `node_replace.txt`, and `caption_gen.txt`
    /// from a directory; files that are absent keep their built-in default.
    pub fn load_dir(dir: &Path) -> Result<Self, PipelineError> {
        let mut templates = Self::default();
        for (name, slot) in [
            ("graph_parse.txt", &mut templates.graph_parse),
            ("node_replace.txt", &mut templates.node_replace),
            ("caption_gen.txt", &mut templates.caption_gen),
        ] {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(&path).map_err(|e| {
                    PipelineError::Input(format!("cannot read template {}: {e}", path.display()))
                })?;
            }
        }
        Ok(templates)
    }

    /// Hash of all three templates, recorded in stage provenance.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.graph_parse.as_bytes());
        hasher.update(self.node_replace.as_bytes());
        hasher.update(self.caption_gen.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Replaces each `{name}` placeholder with its value; unknown braces are left
/// untouched so templates can contain literal JSON.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in values {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}
