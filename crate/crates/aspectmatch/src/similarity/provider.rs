//! Embedding provider contract and the HTTP client implementation.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SimilarityError, TokenEmbeddingSequence};

/// What a provider can do; recorded in reports for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderCapabilities {
    /// Provider/model identity including its version.
    pub name: String,
    pub dimension: usize,
    pub max_batch_size: usize,
    /// Whether the client tolerates concurrent in-flight batches. When false
    /// the engine serializes requests.
    pub concurrent_batches: bool,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    /// Transport-level failure that persisted through the bounded retries.
    #[error("embedding provider transport failure: {0}")]
    Transport(String),
    /// The provider answered but violated the wire contract.
    #[error("embedding provider protocol violation: {0}")]
    Protocol(String),
}

/// Batch text-to-token-embeddings contract. Implementations must be
/// deterministic for identical input within one provider version.
pub trait EmbeddingProvider: Send + Sync {
    fn capabilities(&self) -> ProviderCapabilities;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingSequence>, ProviderError>;
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    model: String,
    dim: usize,
    embeddings: Vec<Vec<Vec<f64>>>,
}

/// JSON-over-HTTP provider: POST `{"texts": [...]}`, expect
/// `{"model", "dim", "embeddings"}` with one token-vector list per text.
pub struct HttpEmbeddingProvider {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    max_retries: u32,
    retry_backoff: Duration,
    capabilities: std::sync::Mutex<Option<ProviderCapabilities>>,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("http client"),
            max_retries: 3,
            retry_backoff: Duration::from_millis(250),
            capabilities: std::sync::Mutex::new(None),
        }
    }

    /// Endpoint from `EMBEDDING_ENDPOINT`, bearer token from
    /// `EMBEDDING_API_KEY` when set.
    pub fn from_env() -> Result<Self, SimilarityError> {
        let endpoint = std::env::var("EMBEDDING_ENDPOINT").map_err(|_| {
            SimilarityError::Config("EMBEDDING_ENDPOINT is not set".into())
        })?;
        Ok(Self::new(endpoint, std::env::var("EMBEDDING_API_KEY").ok()))
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.retry_backoff = backoff;
        self
    }

    fn request(&self, texts: &[&str]) -> Result<EmbedResponse, ProviderError> {
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.retry_backoff);
            }
            let mut req = self.client.post(&self.endpoint).json(&EmbedRequest { texts });
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.json::<EmbedResponse>().map_err(|e| {
                            ProviderError::Protocol(format!("malformed response body: {e}"))
                        });
                    }
                    if status.is_server_error() {
                        last_error = format!("server responded {status}");
                        continue; // retryable
                    }
                    return Err(ProviderError::Protocol(format!(
                        "server responded {status}"
                    )));
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(ProviderError::Transport(format!(
            "{last_error} (after {} attempts)",
            self.max_retries + 1
        )))
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn capabilities(&self) -> ProviderCapabilities {
        if let Some(caps) = self.capabilities.lock().unwrap_or_else(|e| e.into_inner()).clone() {
            return caps;
        }
        // Identity is learned from the first successful response; until then
        // report the endpoint itself.
        ProviderCapabilities {
            name: format!("http:{}", self.endpoint),
            dimension: 0,
            max_batch_size: 64,
            concurrent_batches: true,
        }
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingSequence>, ProviderError> {
        let resp = self.request(texts)?;
        if resp.embeddings.len() != texts.len() {
            return Err(ProviderError::Protocol(format!(
                "expected {} embedding sequences, got {}",
                texts.len(),
                resp.embeddings.len()
            )));
        }
        let mut out = Vec::with_capacity(resp.embeddings.len());
        for vectors in resp.embeddings {
            for v in &vectors {
                if v.len() != resp.dim {
                    return Err(ProviderError::Protocol(format!(
                        "vector dimension {} does not match declared dim {}",
                        v.len(),
                        resp.dim
                    )));
                }
            }
            let tokens = (0..vectors.len()).map(|i| format!("t{i}")).collect();
            let seq = TokenEmbeddingSequence::new(tokens, vectors)
                .map_err(|e| ProviderError::Protocol(e.to_string()))?;
            out.push(seq);
        }
        *self.capabilities.lock().unwrap_or_else(|e| e.into_inner()) = Some(ProviderCapabilities {
            name: format!("{}@{}", resp.model, self.endpoint),
            dimension: resp.dim,
            max_batch_size: 64,
            concurrent_batches: true,
        });
        Ok(out)
    }
}

/// Deterministic in-process provider for tests: scripted sequences per text,
/// with an optional hash-derived default so arbitrary texts embed without
/// scripting.
pub struct MockEmbeddingProvider {
    name: String,
    dimension: usize,
    scripted: HashMap<String, Vec<Vec<f64>>>,
    hashed_default: bool,
    concurrent: bool,
}

impl MockEmbeddingProvider {
    pub fn new(name: impl Into<String>, dimension: usize) -> Self {
        Self {
            name: name.into(),
            dimension,
            scripted: HashMap::new(),
            hashed_default: false,
            concurrent: true,
        }
    }

    /// Provider that derives one deterministic unit vector per whitespace
    /// token from a hash of the token text.
    pub fn hashed(dimension: usize) -> Self {
        Self {
            name: "mock-hashed".into(),
            dimension,
            scripted: HashMap::new(),
            hashed_default: true,
            concurrent: true,
        }
    }

    pub fn insert(&mut self, text: impl Into<String>, vectors: Vec<Vec<f64>>) {
        self.scripted.insert(text.into(), vectors);
    }

    pub fn serialized_only(mut self) -> Self {
        self.concurrent = false;
        self
    }

    fn hash_vector(&self, token: &str) -> Vec<f64> {
        use std::collections::hash_map::DefaultHasher;
        use std::hash::{Hash, Hasher};
        let mut v = Vec::with_capacity(self.dimension);
        for i in 0..self.dimension {
            let mut h = DefaultHasher::new();
            token.hash(&mut h);
            i.hash(&mut h);
            // map to [-1, 1], never exactly zero everywhere
            let x = (h.finish() % 2000) as f64 / 1000.0 - 1.0;
            v.push(if x == 0.0 { 0.5 } else { x });
        }
        v
    }
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities {
            name: self.name.clone(),
            dimension: self.dimension,
            max_batch_size: 16,
            concurrent_batches: self.concurrent,
        }
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingSequence>, ProviderError> {
        texts
            .iter()
            .map(|text| {
                if let Some(vectors) = self.scripted.get(*text) {
                    let tokens = (0..vectors.len()).map(|i| format!("t{i}")).collect();
                    return TokenEmbeddingSequence::new(tokens, vectors.clone())
                        .map_err(|e| ProviderError::Protocol(e.to_string()));
                }
                if self.hashed_default {
                    let tokens: Vec<String> =
                        text.split_whitespace().map(str::to_string).collect();
                    let tokens = if tokens.is_empty() {
                        vec![text.to_string()]
                    } else {
                        tokens
                    };
                    let vectors = tokens.iter().map(|t| self.hash_vector(t)).collect();
                    return TokenEmbeddingSequence::new(tokens, vectors)
                        .map_err(|e| ProviderError::Protocol(e.to_string()));
                }
                Err(ProviderError::Protocol(format!(
                    "no scripted embedding for text {text:?}"
                )))
            })
            .collect()
    }
}
