//! Backend-neutral chat-completion access.
//!
//! Every agent turn flows through [`Gateway::complete`], which owns the retry
//! policy, the optional dispatch rate limit, and usage accounting. Backends
//! implement [`ChatBackend`]; [`ScriptedBackend`] serves offline runs and
//! [`LiveBackend`] speaks the chat-completions wire protocol.

mod limiter;
pub mod live;
pub mod scripted;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use limiter::RateLimiter;
pub use live::LiveBackend;
pub use scripted::{ScriptError, ScriptRule, ScriptedBackend, ScriptedFault};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::System => "system",
            Self::User => "user",
            Self::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Sampling and identification parameters shared by all requests in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ChatParams {
    fn default() -> Self {
        Self {
            model_id: "gpt-4".into(),
            temperature: 0.7,
            max_tokens: 1024,
        }
    }
}

/// Backend-neutral chat exchange request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
    /// Accounting bucket, also used for scripted rule matching.
    pub stage_tag: String,
}

impl ChatRequest {
    pub fn new(stage_tag: impl Into<String>, messages: Vec<Message>, params: &ChatParams) -> Self {
        Self {
            messages,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            model_id: params.model_id.clone(),
            stage_tag: stage_tag.into(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("request has no messages".into()));
        }
        if self.messages[0].role == Role::Assistant {
            return Err(GatewayError::InvalidRequest(
                "first message must be system or user".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0.0, 2.0]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn last_user_content(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }

    /// Stable hex digest of the prompt messages; identical message sequences
    /// digest identically across processes.
    pub fn prompt_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for msg in &self.messages {
            let role = msg.role.as_str();
            hasher.update((role.len() as u64).to_le_bytes());
            hasher.update(role.as_bytes());
            hasher.update((msg.content.len() as u64).to_le_bytes());
            hasher.update(msg.content.as_bytes());
        }
        let bytes = hasher.finalize();
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Monotone usage counters, bucketed by stage tag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CallStats {
    pub total_calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub per_stage: BTreeMap<String, u64>,
}

impl CallStats {
    pub fn record(&mut self, stage_tag: &str, response: &ChatResponse) {
        self.total_calls += 1;
        self.prompt_tokens += response.prompt_tokens;
        self.completion_tokens += response.completion_tokens;
        *self.per_stage.entry(stage_tag.to_string()).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: &CallStats) {
        self.total_calls += other.total_calls;
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        for (tag, count) in &other.per_stage {
            *self.per_stage.entry(tag.clone()).or_insert(0) += count;
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("malformed backend reply: {0}")]
    MalformedReply(String),
    /// The scripted backend had no matching rule. Always a fixture bug.
    #[error("no scripted rule matches request (stage `{stage}`, last user message starts `{snippet}`): {detail}")]
    ScriptMiss {
        stage: String,
        snippet: String,
        detail: String,
    },
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport { retryable: true, .. })
    }
}

/// Thread through to [`Gateway::with_config`] to tune retry and rate-limit
/// behavior. Retries apply only to retryable transport failures (network,
/// 5xx, 429); auth rejections and malformed replies are surfaced immediately.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub max_attempts: u32,
    pub backoff_base: Duration,
    /// Maximum dispatches per second, shared across all callers. `None`
    /// disables limiting (scripted runs).
    pub rate_limit_per_sec: Option<u32>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_base: Duration::from_millis(250),
            rate_limit_per_sec: None,
        }
    }
}

/// One backend as seen by all pipeline tasks.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

/// The single choke point all agent turns flow through. Safe for concurrent
/// use; accounting updates are atomic with respect to [`Gateway::snapshot_usage`].
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    config: GatewayConfig,
    stats: Mutex<CallStats>,
    retries: AtomicU64,
    limiter: Option<RateLimiter>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self::with_config(backend, GatewayConfig::default())
    }

    pub fn with_config(backend: Arc<dyn ChatBackend>, config: GatewayConfig) -> Self {
        let limiter = config.rate_limit_per_sec.map(RateLimiter::new);
        Self {
            backend,
            config,
            stats: Mutex::new(CallStats::default()),
            retries: AtomicU64::new(0),
            limiter,
        }
    }

    /// Issues one chat call. Successful calls increment the usage counters
    /// exactly once; failed attempts that get retried never do.
    pub async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let mut attempt = 0u32;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire().await;
            }
            attempt += 1;
            match self.backend.complete(request).await {
                Ok(response) => {
                    self.stats
                        .lock()
                        .expect("stats lock poisoned")
                        .record(&request.stage_tag, &response);
                    return Ok(response);
                }
                Err(err) if err.is_retryable() && attempt < self.config.max_attempts => {
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    tokio::time::sleep(self.backoff_delay(attempt)).await;
                }
                Err(err) => return Err(err),
            }
        }
    }

    /// Exponential backoff with +/-20% jitter.
    fn backoff_delay(&self, attempt: u32) -> Duration {
        let base = self.config.backoff_base.as_millis() as f64;
        let exp = base * f64::from(1u32 << (attempt - 1).min(16));
        let jitter = rand::rng().random_range(0.8..1.2);
        Duration::from_millis((exp * jitter) as u64)
    }

    /// Consistent point-in-time copy of the usage counters.
    pub fn snapshot_usage(&self) -> CallStats {
        self.stats.lock().expect("stats lock poisoned").clone()
    }

    /// Number of retried attempts (tracked separately from successful calls).
    pub fn retry_count(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }
}
