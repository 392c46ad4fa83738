//! Scripted client construction from a `--mock` JSONL script, so every
//! pipeline and loop command runs offline and deterministically.
//!
//! Each line is one entry selected by `module`:
//!
//! ```text
//! {"module":"llm", "prompt_contains":"...", "text":"..."}
//! {"module":"llm", "prompt_contains":"...", "error":"..."}
//! {"module":"llm", "default":true, "text":"..."}
//! {"module":"scorer", "kind":"vera|grammar|clip", "text":"...", "image":"...", "score":0.9}
//! {"module":"scorer", "kind":"vera", "default":true, "score":0.5}
//! {"module":"scorer", "kind":"vera", "error":"..."}
//! {"module":"t2i", "image":"img-0"}           (or "error")
//! {"module":"detector", "image":"img-0", "triplets":[...]}
//! {"module":"detector", "sequence":[[...],[...],[]]}
//! {"module":"detector", "image":"img-1", "error":"..."}
//! {"module":"editor"}                          (or "error")
//! ```
//!
//! The edit-prompt module is always the deterministic scripted generator.

use std::path::Path;

use aspectmatch::autoalign::{
    LoopClients, ScriptedDetector, ScriptedEditPrompter, ScriptedEditor, ScriptedT2i,
};
use aspectmatch::model::TripletSet;
use aspectmatch::pipeline::{ScorerKind, ScorerSet, ScriptedLlmClient, ScriptedScorerClient};
use serde::Deserialize;

use crate::io::read_jsonl;
use crate::CliError;

#[derive(Deserialize)]
struct MockEntry {
    module: String,
    #[serde(default)]
    prompt_contains: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    default: bool,
    #[serde(default)]
    kind: Option<ScorerKind>,
    #[serde(default)]
    image: Option<String>,
    #[serde(default)]
    score: Option<f64>,
    #[serde(default)]
    triplets: Option<TripletSet>,
    #[serde(default)]
    sequence: Option<Vec<TripletSet>>,
}

pub struct MockScript {
    entries: Vec<MockEntry>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        Ok(Self {
            entries: read_jsonl(path)?,
        })
    }

    pub fn llm_client(&self) -> Result<ScriptedLlmClient, CliError> {
        let mut client = ScriptedLlmClient::new();
        for entry in self.entries.iter().filter(|e| e.module == "llm") {
            match (&entry.prompt_contains, &entry.text, &entry.error, entry.default) {
                (Some(needle), Some(text), None, _) => {
                    client = client.reply_when(needle.clone(), text.clone());
                }
                (Some(needle), None, Some(message), _) => {
                    client = client.fail_when(needle.clone(), message.clone());
                }
                (None, Some(text), None, true) => {
                    client = client.default_reply(text.clone());
                }
                _ => {
                    return Err(CliError::Schema(
                        "llm mock entries need prompt_contains+text, prompt_contains+error, \
                         or default+text"
                            .into(),
                    ))
                }
            }
        }
        Ok(client)
    }

    pub fn scorer_set(&self) -> Result<ScorerSet, CliError> {
        let mut set = ScorerSet::default();
        for kind in [ScorerKind::Vera, ScorerKind::Grammar, ScorerKind::Clip] {
            let entries: Vec<&MockEntry> = self
                .entries
                .iter()
                .filter(|e| e.module == "scorer" && e.kind == Some(kind))
                .collect();
            if entries.is_empty() {
                continue;
            }
            let mut client = ScriptedScorerClient::new(kind);
            for entry in entries {
                if let Some(message) = &entry.error {
                    client = client.failing(message.clone());
                } else if entry.default {
                    let score = entry.score.ok_or_else(|| {
                        CliError::Schema("scorer default entry needs a score".into())
                    })?;
                    client = client.with_default(score);
                } else {
                    let (text, score) = match (&entry.text, entry.score) {
                        (Some(text), Some(score)) => (text.clone(), score),
                        _ => {
                            return Err(CliError::Schema(
                                "scorer mock entries need text+score, default+score, or error"
                                    .into(),
                            ))
                        }
                    };
                    client = client.with_score(text, entry.image.as_deref(), score);
                }
            }
            let boxed = Box::new(client);
            match kind {
                ScorerKind::Vera => set.vera = Some(boxed),
                ScorerKind::Grammar => set.grammar = Some(boxed),
                ScorerKind::Clip => set.clip = Some(boxed),
                ScorerKind::Aesthetic => {}
            }
        }
        Ok(set)
    }

    pub fn loop_clients(&self) -> Result<LoopClients, CliError> {
        let mut t2i: Option<ScriptedT2i> = None;
        let mut detector = ScriptedDetector::new();
        let mut editor = ScriptedEditor::new();
        for entry in &self.entries {
            match entry.module.as_str() {
                "t2i" => {
                    t2i = Some(match (&entry.image, &entry.error) {
                        (Some(image), None) => ScriptedT2i::returning(image.clone()),
                        (None, Some(message)) => ScriptedT2i::failing(message.clone()),
                        _ => {
                            return Err(CliError::Schema(
                                "t2i mock entry needs image or error".into(),
                            ))
                        }
                    });
                }
                "detector" => {
                    if let Some(sets) = &entry.sequence {
                        detector = detector.with_sequence(sets.clone());
                    } else if let (Some(image), Some(message)) = (&entry.image, &entry.error) {
                        detector = detector.failing_on(image.clone(), message.clone());
                    } else if let (Some(image), Some(set)) = (&entry.image, &entry.triplets) {
                        detector = detector.with_detection(image.clone(), set.clone());
                    } else {
                        return Err(CliError::Schema(
                            "detector mock entry needs sequence, image+triplets, or image+error"
                                .into(),
                        ));
                    }
                }
                "editor" => {
                    editor = match &entry.error {
                        Some(message) => ScriptedEditor::failing(message.clone()),
                        None => ScriptedEditor::new(),
                    };
                }
                "llm" | "scorer" => {}
                other => {
                    return Err(CliError::Schema(format!("unknown mock module {other:?}")));
                }
            }
        }
        Ok(LoopClients {
            t2i: Box::new(t2i.ok_or_else(|| CliError::Schema("mock script has no t2i entry".into()))?),
            detector: Box::new(detector),
            prompt_gen: Box::new(ScriptedEditPrompter),
            editor: Box::new(editor),
        })
    }
}
