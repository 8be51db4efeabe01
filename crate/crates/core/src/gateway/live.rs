//! HTTP client for OpenAI-compatible chat-completion and embedding endpoints.

use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendError, ChatBackend, EmbeddingBackend, ModelRequest};

/// Environment variable read for the API credential by default.
pub const DEFAULT_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub base_url: String,
    pub api_key: String,
    pub timeout: Duration,
}

impl LiveConfig {
    pub fn from_env(base_url: &str, key_env: &str) -> Result<Self, BackendError> {
        let api_key = std::env::var(key_env)
            .map_err(|_| BackendError::Auth(format!("environment variable {key_env} is not set")))?;
        Ok(LiveConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            timeout: Duration::from_secs(120),
        })
    }
}

struct HttpClient {
    cfg: LiveConfig,
    agent: ureq::Agent,
}

impl HttpClient {
    fn new(cfg: LiveConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .build()
            .into();
        HttpClient { cfg, agent }
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = format!("{}/{}", self.cfg.base_url, path);
        let res = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.cfg.api_key))
            .send_json(body);
        match res {
            Ok(mut resp) => resp
                .body_mut()
                .read_json::<Value>()
                .map_err(|e| BackendError::Transient(format!("reading response: {e}"))),
            Err(ureq::Error::StatusCode(code)) => Err(classify_status(code)),
            Err(e) => Err(BackendError::Transient(e.to_string())),
        }
    }
}

fn classify_status(code: u16) -> BackendError {
    match code {
        401 | 403 => BackendError::Auth(format!("HTTP {code}")),
        408 | 409 | 429 => BackendError::Transient(format!("HTTP {code}")),
        c if c >= 500 => BackendError::Transient(format!("HTTP {c}")),
        c => BackendError::Fatal(format!("HTTP {c}")),
    }
}

/// `POST {base}/chat/completions` with the prompt as a single user message.
pub struct LiveChat {
    http: HttpClient,
}

impl LiveChat {
    pub fn new(cfg: LiveConfig) -> Self {
        LiveChat {
            http: HttpClient::new(cfg),
        }
    }
}

impl ChatBackend for LiveChat {
    fn id(&self) -> String {
        format!("live:{}", self.http.cfg.base_url)
    }

    fn complete(&self, req: &ModelRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": req.params.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.params.temperature,
            "top_p": req.params.top_p,
        });
        let v = self.http.post("chat/completions", &body)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Fatal("response has no choices[0].message.content".into()))
    }
}

/// `POST {base}/embeddings`.
pub struct LiveEmbedder {
    http: HttpClient,
    model: String,
    dim: usize,
}

impl LiveEmbedder {
    pub fn new(cfg: LiveConfig, model: &str, dim: usize) -> Self {
        LiveEmbedder {
            http: HttpClient::new(cfg),
            model: model.to_string(),
            dim,
        }
    }
}

impl EmbeddingBackend for LiveEmbedder {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let v = self
            .http
            .post("embeddings", &json!({"model": self.model, "input": text}))?;
        let arr = v
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Fatal("response has no data[0].embedding".into()))?;
        arr.iter()
            .map(|x| x.as_f64().ok_or_else(|| BackendError::Fatal("non-numeric embedding".into())))
            .collect()
    }
}
