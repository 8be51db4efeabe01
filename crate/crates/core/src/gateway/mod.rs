//! Text-generation and embedding backends behind one caching, retrying,
//! rate-limited front door.
//!
//! A [`Gateway`] wraps a [`ChatBackend`] and an [`EmbeddingBackend`]. Every
//! request is keyed by a hash of everything that determines its answer, so
//! an interrupted run restarted against the same cache file makes no repeat
//! backend calls.

mod cache;
mod limits;
pub mod live;
pub mod mock;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use cache::{CacheEntry, CacheValue, ResponseCache};
pub use limits::{Budget, Clock, ManualClock, Permit, RateLimiter, RetryPolicy, SystemClock};

use crate::io::sha256_hex;
use crate::scenario::{Candidate, PromptBundle, ScenarioKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub model_name: String,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            top_p: 1.0,
            model_name: "gpt-4-turbo".to_string(),
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidParams(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidParams(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: PromptBundle,
    pub params: GenerationParams,
}

impl GenerationRequest {
    pub fn new(prompt: PromptBundle) -> Self {
        let params = prompt.generation_params.clone();
        GenerationRequest { prompt, params }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedComment {
    pub target_ref: String,
    pub author: String,
    pub scenario: ScenarioKind,
    pub candidate: Candidate,
    pub run_index: u32,
    pub temperature: f64,
    pub text: String,
    pub backend_id: String,
    /// Served from the cache; runtime-only, so artifacts do not depend on
    /// whether a run was resumed.
    #[serde(default, skip_serializing)]
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub dim: usize,
    pub model_id: String,
}

/// What a chat backend sees for one call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRequest {
    pub prompt: String,
    pub params: GenerationParams,
    pub run_index: u32,
    /// Bumped when a caller deliberately re-asks the same question.
    pub attempt: u32,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum BackendError {
    #[error("transient: {0}")]
    Transient(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempt(s): {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("call budget of {max} exhausted")]
    BudgetExceeded { max: u64 },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("backend returned {0}")]
    BadResponse(String),
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

pub trait ChatBackend: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, req: &ModelRequest) -> Result<String, BackendError>;
}

pub trait EmbeddingBackend: Send + Sync {
    fn model_id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;
}

pub struct GatewayConfig {
    pub retry: RetryPolicy,
    pub limiter: RateLimiter,
    pub budget: Budget,
    pub clock: Arc<dyn Clock>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            retry: RetryPolicy::default(),
            limiter: RateLimiter::unlimited(),
            budget: Budget::default(),
            clock: Arc::new(SystemClock::default()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounters {
    pub backend_calls: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

pub struct Gateway {
    chat: Arc<dyn ChatBackend>,
    embedder: Option<Arc<dyn EmbeddingBackend>>,
    cache: ResponseCache,
    cfg: GatewayConfig,
    counters: Mutex<CallCounters>,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Gateway {
    pub fn new(chat: Arc<dyn ChatBackend>, cache: ResponseCache, cfg: GatewayConfig) -> Self {
        Gateway {
            chat,
            embedder: None,
            cache,
            cfg,
            counters: Mutex::new(CallCounters::default()),
            key_locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_embedder(mut self, e: Arc<dyn EmbeddingBackend>) -> Self {
        self.embedder = Some(e);
        self
    }

    pub fn chat_id(&self) -> String {
        self.chat.id()
    }

    pub fn counters(&self) -> CallCounters {
        self.counters.lock().unwrap().clone()
    }

    pub fn budget(&self) -> &Budget {
        &self.cfg.budget
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn limiter(&self) -> &RateLimiter {
        &self.cfg.limiter
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        self.key_locks
            .lock()
            .unwrap()
            .entry(key.to_string())
            .or_default()
            .clone()
    }

    fn count(&self, f: impl FnOnce(&mut CallCounters)) {
        f(&mut self.counters.lock().unwrap());
    }

    /// Calls `op` with retries, budget accounting and rate limiting.
    fn call_backend<T>(
        &self,
        salt: u64,
        op: impl Fn() -> Result<T, BackendError>,
    ) -> Result<T, GatewayError> {
        let policy = &self.cfg.retry;
        let mut last = String::new();
        let attempts = policy.max_attempts.max(1);
        for attempt in 0..attempts {
            if !self.cfg.budget.try_consume() {
                return Err(GatewayError::BudgetExceeded {
                    max: self.cfg.budget.max_calls().unwrap_or(0),
                });
            }
            let res = {
                let _permit = self.cfg.limiter.acquire(self.cfg.clock.as_ref());
                self.count(|c| c.backend_calls += 1);
                op()
            };
            match res {
                Ok(v) => return Ok(v),
                Err(BackendError::Auth(m)) => return Err(GatewayError::AuthError(m)),
                Err(BackendError::Fatal(m)) => {
                    return Err(GatewayError::BackendUnavailable {
                        attempts: attempt + 1,
                        last: m,
                    })
                }
                Err(BackendError::Transient(m)) => {
                    log::debug!("transient backend failure (attempt {}): {m}", attempt + 1);
                    last = m;
                    if attempt + 1 < attempts {
                        self.cfg.clock.sleep(policy.backoff(attempt, salt));
                    }
                }
            }
        }
        Err(GatewayError::BackendUnavailable { attempts, last })
    }

    /// Raw completion, cached under `(prompt, params, run_index, attempt)`.
    /// Returns the text and whether it came from the cache.
    pub fn complete(&self, req: &ModelRequest) -> Result<(String, bool), GatewayError> {
        req.params.validate()?;
        let key = sha256_hex(&serde_json::to_vec(&("chat", req)).expect("serializable request"));
        let lock = self.key_lock(&key);
        let _guard = lock.lock().unwrap();
        if let Some(CacheValue::Text { response_text }) = self.cache.get(&key) {
            self.count(|c| c.cache_hits += 1);
            return Ok((response_text, true));
        }
        self.count(|c| c.cache_misses += 1);
        let salt = u64::from_str_radix(&key[..16], 16).unwrap_or(0);
        let text = self.call_backend(salt, || self.chat.complete(req))?;
        if text.trim().is_empty() {
            return Err(GatewayError::BadResponse("an empty completion".into()));
        }
        self.cache.insert(CacheEntry {
            key_hash: key,
            request_digest: sha256_hex(req.prompt.as_bytes()),
            value: CacheValue::Text {
                response_text: text.clone(),
            },
        })?;
        Ok((text, false))
    }

    pub fn generate(
        &self,
        request: &GenerationRequest,
        run_index: u32,
    ) -> Result<GeneratedComment, GatewayError> {
        let req = ModelRequest {
            prompt: request.prompt.text.clone(),
            params: request.params.clone(),
            run_index,
            attempt: 0,
        };
        let (text, cached) = self.complete(&req)?;
        Ok(GeneratedComment {
            target_ref: request.prompt.target_ref.clone(),
            author: request.prompt.author.clone(),
            scenario: request.prompt.scenario,
            candidate: request.prompt.candidate,
            run_index,
            temperature: request.params.temperature,
            text: text.trim().to_string(),
            backend_id: self.chat.id(),
            cached,
        })
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        let embedder = self
            .embedder
            .as_ref()
            .ok_or_else(|| GatewayError::BackendUnavailable {
                attempts: 0,
                last: "no embedding backend configured".into(),
            })?;
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyText);
        }
        let model_id = embedder.model_id();
        let key = sha256_hex(&serde_json::to_vec(&("embed", &model_id, text)).expect("serializable"));
        let dim = embedder.dim();
        let lock = self.key_lock(&key);
        let _guard = lock.lock().unwrap();
        if let Some(CacheValue::Vector { vector }) = self.cache.get(&key) {
            self.count(|c| c.cache_hits += 1);
            return Ok(EmbeddingVector {
                dim: vector.len(),
                values: vector,
                model_id,
            });
        }
        self.count(|c| c.cache_misses += 1);
        let salt = u64::from_str_radix(&key[..16], 16).unwrap_or(0);
        let values = self.call_backend(salt, || embedder.embed(text))?;
        if values.len() != dim {
            return Err(GatewayError::BadResponse(format!(
                "a {}-dimensional vector, expected {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GatewayError::BadResponse("a non-finite embedding".into()));
        }
        self.cache.insert(CacheEntry {
            key_hash: key,
            request_digest: sha256_hex(text.as_bytes()),
            value: CacheValue::Vector {
                vector: values.clone(),
            },
        })?;
        Ok(EmbeddingVector {
            values,
            dim,
            model_id,
        })
    }
}
