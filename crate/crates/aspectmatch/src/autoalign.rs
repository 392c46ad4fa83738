//! The detect-and-edit alignment loop: generate an image from a prompt, then
//! repeatedly detect mismatches, generate an edit instruction, and apply it,
//! until the detector reports alignment or the iteration budget runs out.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::TripletSet;
use crate::pipeline::ClientError;

/// Prompt-to-image generation.
pub trait TextToImageClient: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, ClientError>;
    fn version(&self) -> String;
}

/// Mismatch detection over an image/caption pair. An empty set means the
/// image is aligned with the caption.
pub trait DetectorClient: Send + Sync {
    fn detect(&self, image: &str, caption: &str) -> Result<TripletSet, ClientError>;
    fn version(&self) -> String;
}

/// Turns detected mismatches into an image-editing instruction.
pub trait EditPromptClient: Send + Sync {
    fn generate_edit(&self, caption: &str, mismatches: &TripletSet)
        -> Result<String, ClientError>;
    fn version(&self) -> String;
}

/// Applies an editing instruction to an image, producing a new image.
pub trait ImageEditorClient: Send + Sync {
    fn edit(&self, image: &str, instruction: &str) -> Result<String, ClientError>;
    fn version(&self) -> String;
}

/// The four modules the loop orchestrates.
pub struct LoopClients {
    pub t2i: Box<dyn TextToImageClient>,
    pub detector: Box<dyn DetectorClient>,
    pub prompt_gen: Box<dyn EditPromptClient>,
    pub editor: Box<dyn ImageEditorClient>,
}

impl LoopClients {
    pub fn versions(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("t2i".to_string(), self.t2i.version()),
            ("detector".to_string(), self.detector.version()),
            ("prompt_gen".to_string(), self.prompt_gen.version()),
            ("editor".to_string(), self.editor.version()),
        ])
    }
}

/// One loop step: the image examined, what the detector found, and the edit
/// instruction issued (absent when the loop stopped at this image).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopIteration {
    pub image: String,
    pub detected: TripletSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edit_instruction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// The detector returned an empty set.
    Aligned,
    /// Every allowed iteration still detected mismatches.
    BudgetExhausted,
    /// A client failed (after its own bounded retries).
    ClientError { stage: String, message: String },
}

/// Ordered, replayable record of one loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub prompt: String,
    pub iterations: Vec<LoopIteration>,
    pub termination: Termination,
    pub iteration_count: usize,
    pub client_versions: BTreeMap<String, String>,
}

/// Runs the alignment loop for at most `max_iters` detector calls.
///
/// Each iteration detects mismatches on the current image; an empty detection
/// terminates as aligned. A non-empty detection on any iteration but the last
/// produces an edit instruction and an edited image for the next round; on
/// the last allowed iteration the loop stops as budget-exhausted without
/// editing. Client failures terminate the loop with the partial trace.
pub fn run_loop(prompt: &str, clients: &LoopClients, max_iters: usize) -> LoopTrace {
    assert!(max_iters >= 1, "max_iters must be >= 1");
    let mut trace = LoopTrace {
        prompt: prompt.to_string(),
        iterations: Vec::new(),
        termination: Termination::Aligned,
        iteration_count: 0,
        client_versions: clients.versions(),
    };

    let mut image = match clients.t2i.generate(prompt) {
        Ok(image) => image,
        Err(e) => {
            trace.termination = Termination::ClientError {
                stage: "t2i".into(),
                message: e.to_string(),
            };
            return trace;
        }
    };

    for iteration in 1..=max_iters {
        let detected = match clients.detector.detect(&image, prompt) {
            Ok(set) => set,
            Err(e) => {
                trace.termination = Termination::ClientError {
                    stage: "detector".into(),
                    message: e.to_string(),
                };
                trace.iteration_count = trace.iterations.len();
                return trace;
            }
        };
        if detected.is_empty() {
            trace.iterations.push(LoopIteration {
                image,
                detected,
                edit_instruction: None,
            });
            trace.termination = Termination::Aligned;
            trace.iteration_count = trace.iterations.len();
            return trace;
        }
        if iteration == max_iters {
            trace.iterations.push(LoopIteration {
                image,
                detected,
                edit_instruction: None,
            });
            trace.termination = Termination::BudgetExhausted;
            trace.iteration_count = trace.iterations.len();
            return trace;
        }
        let instruction = match clients.prompt_gen.generate_edit(prompt, &detected) {
            Ok(instruction) => instruction,
            Err(e) => {
                trace.iterations.push(LoopIteration {
                    image,
                    detected,
                    edit_instruction: None,
                });
                trace.termination = Termination::ClientError {
                    stage: "prompt_gen".into(),
                    message: e.to_string(),
                };
                trace.iteration_count = trace.iterations.len();
                return trace;
            }
        };
        let edited = clients.editor.edit(&image, &instruction);
        trace.iterations.push(LoopIteration {
            image,
            detected,
            edit_instruction: Some(instruction),
        });
        match edited {
            Ok(next) => image = next,
            Err(e) => {
                trace.termination = Termination::ClientError {
                    stage: "editor".into(),
                    message: e.to_string(),
                };
                trace.iteration_count = trace.iterations.len();
                return trace;
            }
        }
    }
    unreachable!("loop returns within max_iters iterations");
}

// ---------------------------------------------------------------------------
// HTTP clients, one per module, with operation-specific JSON bodies.

fn post_json<Req: Serialize, Resp: serde::de::DeserializeOwned>(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    api_key: Option<&str>,
    body: &Req,
) -> Result<Resp, ClientError> {
    let mut req = client.post(endpoint).json(body);
    if let Some(key) = api_key {
        req = req.bearer_auth(key);
    }
    let resp = req
        .send()
        .map_err(|e| ClientError::Transport(e.to_string()))?;
    let status = resp.status();
    if !status.is_success() {
        return Err(ClientError::Transport(format!("server responded {status}")));
    }
    resp.json()
        .map_err(|e| ClientError::Protocol(format!("malformed response body: {e}")))
}

/// One JSON-over-HTTP loop module client. The operation determines the body:
/// t2i `{"prompt"}` -> `{"image"}`; detector `{"image", "caption"}` ->
/// `{"triplets": [...]}`; prompt generation `{"caption", "mismatches"}` ->
/// `{"instruction"}`; editor `{"image", "instruction"}` -> `{"image"}`.
pub struct HttpLoopClient {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpLoopClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(300))
                .build()
                .expect("http client"),
        }
    }
}

impl TextToImageClient for HttpLoopClient {
    fn generate(&self, prompt: &str) -> Result<String, ClientError> {
        #[derive(Serialize)]
        struct Req<'a> {
            prompt: &'a str,
        }
        #[derive(Deserialize)]
        struct Resp {
            image: String,
        }
        let resp: Resp = post_json(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &Req { prompt },
        )?;
        Ok(resp.image)
    }

    fn version(&self) -> String {
        format!("http:{}", self.endpoint)
    }
}

impl DetectorClient for HttpLoopClient {
    fn detect(&self, image: &str, caption: &str) -> Result<TripletSet, ClientError> {
        #[derive(Serialize)]
        struct Req<'a> {
            image: &'a str,
            caption: &'a str,
        }
        #[derive(Deserialize)]
        struct Resp {
            triplets: TripletSet,
        }
        let resp: Resp = post_json(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &Req { image, caption },
        )?;
        Ok(resp.triplets)
    }

    fn version(&self) -> String {
        format!("http:{}", self.endpoint)
    }
}

impl EditPromptClient for HttpLoopClient {
    fn generate_edit(
        &self,
        caption: &str,
        mismatches: &TripletSet,
    ) -> Result<String, ClientError> {
        #[derive(Serialize)]
        struct Req<'a> {
            caption: &'a str,
            mismatches: &'a TripletSet,
        }
        #[derive(Deserialize)]
        struct Resp {
            instruction: String,
        }
        let resp: Resp = post_json(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &Req { caption, mismatches },
        )?;
        Ok(resp.instruction)
    }

    fn version(&self) -> String {
        format!("http:{}", self.endpoint)
    }
}

impl ImageEditorClient for HttpLoopClient {
    fn edit(&self, image: &str, instruction: &str) -> Result<String, ClientError> {
        #[derive(Serialize)]
        struct Req<'a> {
            image: &'a str,
            instruction: &'a str,
        }
        #[derive(Deserialize)]
        struct Resp {
            image: String,
        }
        let resp: Resp = post_json(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &Req { image, instruction },
        )?;
        Ok(resp.image)
    }

    fn version(&self) -> String {
        format!("http:{}", self.endpoint)
    }
}

// ---------------------------------------------------------------------------
// Scripted clients for offline runs and tests.

/// Scripted text-to-image client: one fixed image reference per prompt, or a
/// single default.
pub struct ScriptedT2i {
    pub images: HashMap<String, String>,
    pub default_image: Option<String>,
    pub fail: Option<String>,
}

impl ScriptedT2i {
    pub fn returning(image: impl Into<String>) -> Self {
        Self {
            images: HashMap::new(),
            default_image: Some(image.into()),
            fail: None,
        }
    }

    pub fn failing(message: impl Into<String>) -> Self {
        Self {
            images: HashMap::new(),
            default_image: None,
            fail: Some(message.into()),
        }
    }
}

impl TextToImageClient for ScriptedT2i {
    fn generate(&self, prompt: &str) -> Result<String, ClientError> {
        if let Some(message) = &self.fail {
            return Err(ClientError::Transport(message.clone()));
        }
        self.images
            .get(prompt)
            .cloned()
            .or_else(|| self.default_image.clone())
            .ok_or_else(|| ClientError::Unscripted(format!("no image for prompt {prompt:?}")))
    }

    fn version(&self) -> String {
        "scripted-t2i-v1".into()
    }
}

/// Scripted detector: detection sets keyed by image reference, with an
/// optional sequential fallback consumed in call order.
pub struct ScriptedDetector {
    pub by_image: HashMap<String, TripletSet>,
    pub sequence: Mutex<Vec<TripletSet>>,
    pub fail_on_image: Option<(String, String)>,
}

impl ScriptedDetector {
    pub fn new() -> Self {
        Self {
            by_image: HashMap::new(),
            sequence: Mutex::new(Vec::new()),
            fail_on_image: None,
        }
    }

    pub fn with_detection(mut self, image: impl Into<String>, set: TripletSet) -> Self {
        self.by_image.insert(image.into(), set);
        self
    }

    /// Detections served in order when no per-image entry matches; the last
    /// entry repeats once the sequence is exhausted.
    pub fn with_sequence(self, sets: Vec<TripletSet>) -> Self {
        *self.sequence.lock().unwrap_or_else(|e| e.into_inner()) =
            sets.into_iter().rev().collect();
        self
    }

    pub fn failing_on(mut self, image: impl Into<String>, message: impl Into<String>) -> Self {
        self.fail_on_image = Some((image.into(), message.into()));
        self
    }
}

impl Default for ScriptedDetector {
    fn default() -> Self {
        Self::new()
    }
}

impl DetectorClient for ScriptedDetector {
    fn detect(&self, image: &str, _caption: &str) -> Result<TripletSet, ClientError> {
        if let Some((target, message)) = &self.fail_on_image {
            if target == image {
                return Err(ClientError::Transport(message.clone()));
            }
        }
        if let Some(set) = self.by_image.get(image) {
            return Ok(set.clone());
        }
        let mut seq = self.sequence.lock().unwrap_or_else(|e| e.into_inner());
        match seq.len() {
            0 => Err(ClientError::Unscripted(format!(
                "no detection for image {image:?}"
            ))),
            1 => Ok(seq[0].clone()),
            _ => Ok(seq.pop().expect("nonempty")),
        }
    }

    fn version(&self) -> String {
        "scripted-detector-v1".into()
    }
}

/// Scripted edit-prompt generator: a deterministic instruction derived from
/// the first detected mismatch.
pub struct ScriptedEditPrompter;

impl EditPromptClient for ScriptedEditPrompter {
    fn generate_edit(
        &self,
        _caption: &str,
        mismatches: &TripletSet,
    ) -> Result<String, ClientError> {
        let first = mismatches
            .iter()
            .next()
            .ok_or_else(|| ClientError::Protocol("no mismatches to edit".into()))?;
        Ok(match &first.correction {
            Some(correction) => format!("replace {:?} with {:?}", first.phrase, correction),
            None => format!("fix {:?}", first.phrase),
        })
    }

    fn version(&self) -> String {
        "scripted-prompter-v1".into()
    }
}

/// Scripted editor: appends an edit counter to the image reference.
pub struct ScriptedEditor {
    pub fail: Option<String>,
    counter: Mutex<usize>,
}

impl ScriptedEditor {
    pub fn new() -> Self {
        Self {
            fail: None,
            counter: Mutex::new(0),
        }
    }

    pub fn failing(message: impl Into<String>) -> Self {
        Self {
            fail: Some(message.into()),
            counter: Mutex::new(0),
        }
    }
}

impl Default for ScriptedEditor {
    fn default() -> Self {
        Self::new()
    }
}

impl ImageEditorClient for ScriptedEditor {
    fn edit(&self, image: &str, _instruction: &str) -> Result<String, ClientError> {
        if let Some(message) = &self.fail {
            return Err(ClientError::Transport(message.clone()));
        }
        let mut counter = self.counter.lock().unwrap_or_else(|e| e.into_inner());
        *counter += 1;
        Ok(format!("{image}+edit{}", *counter))
    }

    fn version(&self) -> String {
        "scripted-editor-v1".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AspectClass, AspectTriplet};

    fn mismatch() -> TripletSet {
        TripletSet::new(vec![AspectTriplet::new(
            AspectClass::Entity,
            "a dog",
            Some("a cat".into()),
        )
        .unwrap()])
    }

    fn clients(detector: ScriptedDetector) -> LoopClients {
        LoopClients {
            t2i: Box::new(ScriptedT2i::returning("img-0")),
            detector: Box::new(detector),
            prompt_gen: Box::new(ScriptedEditPrompter),
            editor: Box::new(ScriptedEditor::new()),
        }
    }

    #[test]
    fn immediate_alignment_is_one_iteration() {
        let detector = ScriptedDetector::new().with_detection("img-0", TripletSet::empty());
        let trace = run_loop("a cat on a mat", &clients(detector), 5);
        assert_eq!(trace.termination, Termination::Aligned);
        assert_eq!(trace.iteration_count, 1);
        assert_eq!(trace.iterations[0].image, "img-0");
        assert!(trace.iterations[0].edit_instruction.is_none());
    }

    #[test]
    fn never_aligning_exhausts_the_budget() {
        let detector = ScriptedDetector::new().with_sequence(vec![mismatch()]);
        let trace = run_loop("a cat on a mat", &clients(detector), 3);
        assert_eq!(trace.termination, Termination::BudgetExhausted);
        assert_eq!(trace.iteration_count, 3);
        // edits happen on every iteration except the last
        assert!(trace.iterations[0].edit_instruction.is_some());
        assert!(trace.iterations[1].edit_instruction.is_some());
        assert!(trace.iterations[2].edit_instruction.is_none());
        for it in &trace.iterations {
            assert!(!it.detected.is_empty());
        }
    }

    #[test]
    fn aligned_at_three_records_two_edits() {
        let detector = ScriptedDetector::new().with_sequence(vec![
            mismatch(),
            mismatch(),
            TripletSet::empty(),
        ]);
        let trace = run_loop("a cat on a mat", &clients(detector), 5);
        assert_eq!(trace.termination, Termination::Aligned);
        assert_eq!(trace.iteration_count, 3);
        assert_eq!(trace.iterations[0].image, "img-0");
        assert_eq!(trace.iterations[1].image, "img-0+edit1");
        assert_eq!(trace.iterations[2].image, "img-0+edit1+edit2");
        assert!(trace.iterations[2].detected.is_empty());
        assert!(trace.iterations[2].edit_instruction.is_none());
    }

    #[test]
    fn t2i_failure_leaves_an_empty_trace() {
        let clients = LoopClients {
            t2i: Box::new(ScriptedT2i::failing("t2i down")),
            detector: Box::new(ScriptedDetector::new()),
            prompt_gen: Box::new(ScriptedEditPrompter),
            editor: Box::new(ScriptedEditor::new()),
        };
        let trace = run_loop("a cat", &clients, 3);
        assert!(matches!(
            trace.termination,
            Termination::ClientError { ref stage, .. } if stage == "t2i"
        ));
        assert_eq!(trace.iteration_count, 0);
    }

    #[test]
    fn editor_failure_keeps_the_partial_trace() {
        let detector = ScriptedDetector::new().with_sequence(vec![mismatch()]);
        let clients = LoopClients {
            t2i: Box::new(ScriptedT2i::returning("img-0")),
            detector: Box::new(detector),
            prompt_gen: Box::new(ScriptedEditPrompter),
            editor: Box::new(ScriptedEditor::failing("editor down")),
        };
        let trace = run_loop("a cat", &clients, 3);
        assert!(matches!(
            trace.termination,
            Termination::ClientError { ref stage, .. } if stage == "editor"
        ));
        assert_eq!(trace.iteration_count, 1);
        assert!(trace.iterations[0].edit_instruction.is_some());
    }

    #[test]
    fn rerunning_with_replaying_clients_reproduces_the_trace() {
        struct ReplayEditor {
            transitions: HashMap<(String, String), String>,
        }
        impl ImageEditorClient for ReplayEditor {
            fn edit(&self, image: &str, instruction: &str) -> Result<String, ClientError> {
                self.transitions
                    .get(&(image.to_string(), instruction.to_string()))
                    .cloned()
                    .ok_or_else(|| ClientError::Unscripted("no transition".into()))
            }
            fn version(&self) -> String {
                "scripted-editor-v1".into()
            }
        }

        let detector = ScriptedDetector::new().with_sequence(vec![
            mismatch(),
            mismatch(),
            TripletSet::empty(),
        ]);
        let original = run_loop("a cat on a mat", &clients(detector), 5);
        assert_eq!(original.termination, Termination::Aligned);

        // rebuild every client from the recorded trace and run again
        let mut detector = ScriptedDetector::new();
        let mut transitions = HashMap::new();
        for (i, step) in original.iterations.iter().enumerate() {
            detector = detector.with_detection(step.image.clone(), step.detected.clone());
            if let Some(instruction) = &step.edit_instruction {
                transitions.insert(
                    (step.image.clone(), instruction.clone()),
                    original.iterations[i + 1].image.clone(),
                );
            }
        }
        let replay_clients = LoopClients {
            t2i: Box::new(ScriptedT2i::returning(original.iterations[0].image.clone())),
            detector: Box::new(detector),
            prompt_gen: Box::new(ScriptedEditPrompter),
            editor: Box::new(ReplayEditor { transitions }),
        };
        let replayed = run_loop("a cat on a mat", &replay_clients, 5);
        assert_eq!(replayed, original);
    }

    #[test]
    fn trace_round_trips_through_json() {
        let detector = ScriptedDetector::new().with_sequence(vec![mismatch(), TripletSet::empty()]);
        let trace = run_loop("a cat", &clients(detector), 5);
        let json = serde_json::to_string(&trace).unwrap();
        let back: LoopTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, trace);
    }
}
