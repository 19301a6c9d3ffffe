//! Deterministic rule-matching backend for offline runs and fixtures.
//!
//! A script is an ordered rule list. The first rule whose `stage` matches the
//! request's stage tag (when given) and whose `contains` substring occurs in
//! the last user message (when given) wins. Identical request sequences yield
//! byte-identical response sequences; sequence cursors advance under one lock
//! so entries are consumed in dispatch order.

use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse script `{path}`: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("rule {index} is invalid: {reason}")]
    InvalidRule { index: usize, reason: String },
}

/// Fault injected in place of a reply, for exercising error paths offline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptedFault {
    Transport,
    Auth,
    Malformed,
}

/// One scripted rule. Exactly one of `response`, `sequence`, or `error` must
/// be set. A `sequence` serves its entries to successive matching calls and
/// reports a script miss once exhausted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ScriptedFault>,
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

impl ScriptRule {
    /// Matches every request; replies with `response`.
    pub fn catch_all(response: impl Into<String>) -> Self {
        Self { response: Some(response.into()), ..Self::default() }
    }

    /// Replies with `response` for requests on `stage` whose last user
    /// message contains `needle`.
    pub fn reply(
        stage: impl Into<String>,
        needle: impl Into<String>,
        response: impl Into<String>,
    ) -> Self {
        Self {
            stage: Some(stage.into()),
            contains: Some(needle.into()),
            response: Some(response.into()),
            ..Self::default()
        }
    }

    /// Serves `entries` one at a time to successive matching calls.
    pub fn sequence<S: Into<String>>(
        stage: impl Into<String>,
        needle: impl Into<String>,
        entries: Vec<S>,
    ) -> Self {
        Self {
            stage: Some(stage.into()),
            contains: Some(needle.into()),
            sequence: Some(entries.into_iter().map(Into::into).collect()),
            ..Self::default()
        }
    }

    /// Fails every matching call with the given fault.
    pub fn fault(
        stage: impl Into<String>,
        needle: impl Into<String>,
        fault: ScriptedFault,
    ) -> Self {
        Self {
            stage: Some(stage.into()),
            contains: Some(needle.into()),
            error: Some(fault),
            ..Self::default()
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct ScriptFile {
    rules: Vec<ScriptRule>,
}

#[derive(Debug)]
enum Reply {
    Single(String),
    Sequence(Vec<String>),
    Fault(ScriptedFault),
}

#[derive(Debug)]
struct CompiledRule {
    stage: Option<String>,
    contains: Option<String>,
    reply: Reply,
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl CompiledRule {
    fn matches(&self, request: &ChatRequest, last_user: &str) -> bool {
        if let Some(stage) = &self.stage {
            if stage != &request.stage_tag {
                return false;
            }
        }
        if let Some(needle) = &self.contains {
            if !last_user.contains(needle.as_str()) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug)]
pub struct ScriptedBackend {
    rules: Vec<CompiledRule>,
    /// Per-rule sequence cursors; one lock serializes advancement.
    cursors: Mutex<Vec<usize>>,
    captured: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn from_rules(rules: Vec<ScriptRule>) -> Result<Self, ScriptError> {
        let compiled = rules
            .into_iter()
            .enumerate()
            .map(|(index, rule)| {
                let set = [rule.response.is_some(), rule.sequence.is_some(), rule.error.is_some()]
                    .iter()
                    .filter(|&&b| b)
                    .count();
                if set != 1 {
                    return Err(ScriptError::InvalidRule {
                        index,
                        reason: "exactly one of `response`, `sequence`, `error` must be set"
                            .into(),
                    });
                }
                let reply = if let Some(r) = rule.response {
                    Reply::Single(r)
                } else if let Some(s) = rule.sequence {
                    Reply::Sequence(s)
                } else {
                    Reply::Fault(rule.error.expect("checked above"))
                };
                Ok(CompiledRule {
                    stage: rule.stage,
                    contains: rule.contains,
                    reply,
                    prompt_tokens: rule.prompt_tokens,
                    completion_tokens: rule.completion_tokens,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cursors = vec![0; compiled.len()];
        Ok(Self {
            rules: compiled,
            cursors: Mutex::new(cursors),
            captured: Mutex::new(Vec::new()),
        })
    }

    pub fn load_script(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: ScriptFile =
            serde_json::from_str(&text).map_err(|source| ScriptError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        Self::from_rules(file.rules)
    }

    /// Every request seen so far, in dispatch order.
    pub fn captured_requests(&self) -> Vec<ChatRequest> {
        self.captured.lock().expect("capture lock poisoned").clone()
    }

    pub fn captured_len(&self) -> usize {
        self.captured.lock().expect("capture lock poisoned").len()
    }
}

fn miss(request: &ChatRequest, detail: &str) -> GatewayError {
    let snippet: String = request
        .last_user_content()
        .unwrap_or("")
        .chars()
        .take(80)
        .collect();
    GatewayError::ScriptMiss {
        stage: request.stage_tag.clone(),
        snippet,
        detail: detail.into(),
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.captured
            .lock()
            .expect("capture lock poisoned")
            .push(request.clone());
        let last_user = request.last_user_content().unwrap_or("").to_string();
        let mut cursors = self.cursors.lock().expect("cursor lock poisoned");
        for (i, rule) in self.rules.iter().enumerate() {
            if !rule.matches(request, &last_user) {
                continue;
            }
            return match &rule.reply {
                Reply::Single(content) => Ok(ChatResponse {
                    content: content.clone(),
                    prompt_tokens: rule.prompt_tokens,
                    completion_tokens: rule.completion_tokens,
                }),
                Reply::Sequence(entries) => {
                    let cursor = &mut cursors[i];
                    if *cursor < entries.len() {
                        let content = entries[*cursor].clone();
                        *cursor += 1;
                        Ok(ChatResponse {
                            content,
                            prompt_tokens: rule.prompt_tokens,
                            completion_tokens: rule.completion_tokens,
                        })
                    } else {
                        Err(miss(request, &format!("rule {i} sequence exhausted")))
                    }
                }
                Reply::Fault(fault) => Err(match fault {
                    ScriptedFault::Transport => GatewayError::Transport {
                        message: "scripted fault".into(),
                        retryable: true,
                    },
                    ScriptedFault::Auth => GatewayError::Auth("scripted fault".into()),
                    ScriptedFault::Malformed => {
                        GatewayError::MalformedReply("scripted fault".into())
                    }
                }),
            };
        }
        Err(miss(request, "no rule matched"))
    }
}
