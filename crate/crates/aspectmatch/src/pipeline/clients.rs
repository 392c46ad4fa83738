//! Client contracts for the external models the pipeline drives, with HTTP
//! implementations and scripted in-process doubles for offline runs.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("client transport failure: {0}")]
    Transport(String),
    #[error("client protocol violation: {0}")]
    Protocol(String),
    /// A scripted client had no reply for the request.
    #[error("no scripted reply: {0}")]
    Unscripted(String),
}

/// Text completion contract.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str, max_tokens: u32) -> Result<String, ClientError>;
    fn version(&self) -> String;
}

/// The scorer families used for debiasing and ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Vera,
    Grammar,
    Clip,
    Aesthetic,
}

impl ScorerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScorerKind::Vera => "vera",
            ScorerKind::Grammar => "grammar",
            ScorerKind::Clip => "clip",
            ScorerKind::Aesthetic => "aesthetic",
        }
    }

    /// Text-only scorers reject an image reference; CLIP requires one.
    pub fn requires_image(&self) -> bool {
        matches!(self, ScorerKind::Clip)
    }

    pub fn rejects_image(&self) -> bool {
        matches!(self, ScorerKind::Vera | ScorerKind::Grammar)
    }
}

/// Scalar scoring contract for one scorer kind.
pub trait ScorerClient: Send + Sync {
    fn kind(&self) -> ScorerKind;
    fn score(&self, text: &str, image: Option<&str>) -> Result<f64, ClientError>;
    fn version(&self) -> String;
}

/// Invokes a scorer after checking the image-reference rules of its kind.
pub fn validated_score(
    client: &dyn ScorerClient,
    text: &str,
    image: Option<&str>,
) -> Result<f64, ClientError> {
    let kind = client.kind();
    if kind.requires_image() && image.is_none() {
        return Err(ClientError::Protocol(format!(
            "{} scorer requires an image reference",
            kind.name()
        )));
    }
    if kind.rejects_image() && image.is_some() {
        return Err(ClientError::Protocol(format!(
            "{} scorer is text-only but got an image reference",
            kind.name()
        )));
    }
    client.score(text, image)
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// JSON-over-HTTP completion client: POST `{"prompt", "max_tokens"}`, expect
/// `{"text"}`. Transport failures are retried a bounded number of times.
pub struct HttpLlmClient {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    max_retries: u32,
    retry_backoff: Duration,
}

impl HttpLlmClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client"),
            max_retries: 3,
            retry_backoff: Duration::from_millis(250),
        }
    }

    /// Endpoint from `LLM_ENDPOINT`, bearer token from `LLM_API_KEY`.
    pub fn from_env() -> Result<Self, ClientError> {
        let endpoint = std::env::var("LLM_ENDPOINT")
            .map_err(|_| ClientError::Transport("LLM_ENDPOINT is not set".into()))?;
        Ok(Self::new(endpoint, std::env::var("LLM_API_KEY").ok()))
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.retry_backoff = backoff;
        self
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str, max_tokens: u32) -> Result<String, ClientError> {
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.retry_backoff);
            }
            let mut req = self
                .client
                .post(&self.endpoint)
                .json(&CompletionRequest { prompt, max_tokens });
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp
                            .json::<CompletionResponse>()
                            .map(|r| r.text)
                            .map_err(|e| {
                                ClientError::Protocol(format!("malformed response body: {e}"))
                            });
                    }
                    if status.is_server_error() {
                        last_error = format!("server responded {status}");
                        continue;
                    }
                    return Err(ClientError::Protocol(format!("server responded {status}")));
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(ClientError::Transport(format!(
            "{last_error} (after {} attempts)",
            self.max_retries + 1
        )))
    }

    fn version(&self) -> String {
        format!("http:{}", self.endpoint)
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    image: Option<&'a str>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
    version: String,
}

/// JSON-over-HTTP scorer client: POST `{"text", "image"?}`, expect
/// `{"score", "version"}`.
pub struct HttpScorerClient {
    kind: ScorerKind,
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    max_retries: u32,
    retry_backoff: Duration,
    seen_version: Mutex<Option<String>>,
}

impl HttpScorerClient {
    pub fn new(kind: ScorerKind, endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            kind,
            endpoint: endpoint.into(),
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("http client"),
            max_retries: 3,
            retry_backoff: Duration::from_millis(250),
            seen_version: Mutex::new(None),
        }
    }
}

impl ScorerClient for HttpScorerClient {
    fn kind(&self) -> ScorerKind {
        self.kind
    }

    fn score(&self, text: &str, image: Option<&str>) -> Result<f64, ClientError> {
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.retry_backoff);
            }
            let mut req = self
                .client
                .post(&self.endpoint)
                .json(&ScoreRequest { text, image });
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let body: ScoreResponse = resp.json().map_err(|e| {
                            ClientError::Protocol(format!("malformed response body: {e}"))
                        })?;
                        *self.seen_version.lock().unwrap_or_else(|e| e.into_inner()) =
                            Some(body.version);
                        return Ok(body.score);
                    }
                    if status.is_server_error() {
                        last_error = format!("server responded {status}");
                        continue;
                    }
                    return Err(ClientError::Protocol(format!("server responded {status}")));
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(ClientError::Transport(format!(
            "{last_error} (after {} attempts)",
            self.max_retries + 1
        )))
    }

    fn version(&self) -> String {
        self.seen_version
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
            .unwrap_or_else(|| format!("http:{}", self.endpoint))
    }
}

/// Scripted completion client: substring rules matched against the prompt,
/// first match wins. Deterministic regardless of call order; every prompt is
/// recorded for assertions.
#[derive(Default)]
pub struct ScriptedLlmClient {
    rules: Vec<(String, Result<String, String>)>,
    default_reply: Option<String>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedLlmClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replies with `reply` when the prompt contains `needle`.
    pub fn reply_when(mut self, needle: impl Into<String>, reply: impl Into<String>) -> Self {
        self.rules.push((needle.into(), Ok(reply.into())));
        self
    }

    /// Fails with a transport error when the prompt contains `needle`.
    pub fn fail_when(mut self, needle: impl Into<String>, message: impl Into<String>) -> Self {
        self.rules.push((needle.into(), Err(message.into())));
        self
    }

    pub fn default_reply(mut self, reply: impl Into<String>) -> Self {
        self.default_reply = Some(reply.into());
        self
    }

    pub fn recorded_prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl LlmClient for ScriptedLlmClient {
    fn complete(&self, prompt: &str, _max_tokens: u32) -> Result<String, ClientError> {
        self.prompts
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(prompt.to_string());
        for (needle, reply) in &self.rules {
            if prompt.contains(needle.as_str()) {
                return match reply {
                    Ok(text) => Ok(text.clone()),
                    Err(message) => Err(ClientError::Transport(message.clone())),
                };
            }
        }
        match &self.default_reply {
            Some(text) => Ok(text.clone()),
            None => Err(ClientError::Unscripted(format!(
                "prompt matched no rule: {:?}...",
                prompt.chars().take(60).collect::<String>()
            ))),
        }
    }

    fn version(&self) -> String {
        "scripted-llm-v1".into()
    }
}

/// Scripted scorer: exact (text, image) lookups with an optional default.
pub struct ScriptedScorerClient {
    kind: ScorerKind,
    scores: HashMap<(String, Option<String>), f64>,
    default_score: Option<f64>,
    fail: Option<String>,
}

impl ScriptedScorerClient {
    pub fn new(kind: ScorerKind) -> Self {
        Self {
            kind,
            scores: HashMap::new(),
            default_score: None,
            fail: None,
        }
    }

    pub fn with_score(mut self, text: impl Into<String>, image: Option<&str>, score: f64) -> Self {
        self.scores
            .insert((text.into(), image.map(str::to_string)), score);
        self
    }

    pub fn with_default(mut self, score: f64) -> Self {
        self.default_score = Some(score);
        self
    }

    /// Always fails with a transport error.
    pub fn failing(mut self, message: impl Into<String>) -> Self {
        self.fail = Some(message.into());
        self
    }
}

impl ScorerClient for ScriptedScorerClient {
    fn kind(&self) -> ScorerKind {
        self.kind
    }

    fn score(&self, text: &str, image: Option<&str>) -> Result<f64, ClientError> {
        if let Some(message) = &self.fail {
            return Err(ClientError::Transport(message.clone()));
        }
        let key = (text.to_string(), image.map(str::to_string));
        if let Some(score) = self.scores.get(&key) {
            return Ok(*score);
        }
        self.default_score.ok_or_else(|| {
            ClientError::Unscripted(format!(
                "{} scorer has no score for {text:?}",
                self.kind.name()
            ))
        })
    }

    fn version(&self) -> String {
        format!("scripted-{}-v1", self.kind.name())
    }
}
