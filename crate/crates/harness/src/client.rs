//! Blocking client for OpenAI-compatible chat-completions endpoints.

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Attempts after the first one.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        Duration::from_millis(self.backoff_ms.saturating_mul(1u64 << retry.min(16)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Up to and including the API version, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_timeout_ms: u64,
    pub max_parallel_requests: usize,
    pub retry: RetryPolicy,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: String,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            temperature: 0.0,
            max_output_tokens: 512,
            request_timeout_ms: 60_000,
            max_parallel_requests: 4,
            retry: RetryPolicy::default(),
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.max_parallel_requests == 0 {
            return Err("max parallel requests must be at least 1".into());
        }
        if self.request_timeout_ms == 0 {
            return Err("request timeout must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompletionError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {0}: {1}")]
    Status(u16, String),
    #[error("unexpected response body: {0}")]
    Malformed(String),
}

impl CompletionError {
    fn retryable(&self) -> bool {
        match self {
            Self::Transport(_) => true,
            Self::Status(code, _) => *code >= 500 || *code == 429 || *code == 408,
            Self::Malformed(_) => false,
        }
    }
}

/// A completion that failed after every allowed attempt.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{attempts} attempt(s), last error: {last}")]
pub struct Exhausted {
    pub attempts: u32,
    pub last: CompletionError,
}

pub struct Client {
    config: EndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl fmt::Debug for Client {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Client")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl Client {
    /// Reads the credential from the configured environment variable.
    pub fn new(config: EndpointConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.request_timeout_ms))
            .build();
        Self { config, agent, api_key }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn attempt(&self, body: &Json) -> Result<String, CompletionError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let text = r.into_string().unwrap_or_default();
                return Err(CompletionError::Status(code, text.chars().take(200).collect()));
            }
            Err(ureq::Error::Transport(t)) => return Err(CompletionError::Transport(t.to_string())),
        };
        let v: Json = resp
            .into_json()
            .map_err(|e| CompletionError::Transport(format!("reading body: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Json::as_str)
            .map(String::from)
            .ok_or_else(|| CompletionError::Malformed(v.to_string().chars().take(200).collect()))
    }

    /// One system and one user message; retries transport errors, 5xx, 408
    /// and 429 with exponential backoff.
    pub fn complete(&self, system: &str, user: &str) -> Result<String, Exhausted> {
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        });
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(e) if e.retryable() && attempts <= self.config.retry.max_retries => {
                    thread::sleep(self.config.retry.delay(attempts - 1));
                }
                Err(last) => return Err(Exhausted { attempts, last }),
            }
        }
    }
}
