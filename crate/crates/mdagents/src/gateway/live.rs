//! Hosted-model client speaking the chat-completions wire protocol.
//!
//! Requests POST to the configured base URL with a bearer token; the reply
//! content is read from `choices[0].message.content` and usage from
//! `usage.prompt_tokens` / `usage.completion_tokens`.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};

pub const API_KEY_ENV: &str = "MDAGENTS_API_KEY";
pub const BASE_URL_ENV: &str = "MDAGENTS_BASE_URL";

#[derive(Debug, Error)]
pub enum LiveConfigError {
    #[error("environment variable {0} is not set")]
    MissingEnv(&'static str),
}

pub struct LiveBackend {
    client: reqwest::Client,
    base_url: String,
    api_key: String,
}

impl LiveBackend {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            client: reqwest::Client::new(),
            base_url: base_url.into(),
            api_key: api_key.into(),
        }
    }

    /// Reads the endpoint and credential from `MDAGENTS_BASE_URL` and
    /// `MDAGENTS_API_KEY`.
    pub fn from_env() -> Result<Self, LiveConfigError> {
        let base_url =
            std::env::var(BASE_URL_ENV).map_err(|_| LiveConfigError::MissingEnv(BASE_URL_ENV))?;
        let api_key =
            std::env::var(API_KEY_ENV).map_err(|_| LiveConfigError::MissingEnv(API_KEY_ENV))?;
        Ok(Self::new(base_url, api_key))
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReplyMessage,
}

#[derive(Deserialize)]
struct WireReplyMessage {
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

fn encode(request: &ChatRequest) -> WireRequest<'_> {
    WireRequest {
        model: &request.model_id,
        messages: request
            .messages
            .iter()
            .map(|m| WireMessage { role: m.role.as_str(), content: &m.content })
            .collect(),
        temperature: request.temperature,
        max_tokens: request.max_tokens,
    }
}

fn decode(body: &str) -> Result<ChatResponse, GatewayError> {
    let wire: WireResponse = serde_json::from_str(body)
        .map_err(|e| GatewayError::MalformedReply(format!("undecodable payload: {e}")))?;
    let content = wire
        .choices
        .first()
        .and_then(|c| c.message.content.clone())
        .ok_or_else(|| GatewayError::MalformedReply("reply has no message content".into()))?;
    let usage = wire.usage.unwrap_or_default();
    Ok(ChatResponse {
        content,
        prompt_tokens: usage.prompt_tokens,
        completion_tokens: usage.completion_tokens,
    })
}

#[async_trait]
impl ChatBackend for LiveBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let response = self
            .client
            .post(&self.base_url)
            .bearer_auth(&self.api_key)
            .json(&encode(request))
            .send()
            .await
            .map_err(|e| GatewayError::Transport { message: e.to_string(), retryable: true })?;
        let status = response.status();
        let body = response.text().await.map_err(|e| GatewayError::Transport {
            message: format!("failed reading response body: {e}"),
            retryable: true,
        })?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(GatewayError::Auth(format!("status {status}: {body}")));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(GatewayError::Transport {
                message: format!("status {status}"),
                retryable: true,
            });
        }
        if !status.is_success() {
            return Err(GatewayError::Transport {
                message: format!("status {status}: {body}"),
                retryable: false,
            });
        }
        decode(&body)
    }
}
