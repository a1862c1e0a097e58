//! Chat-completion backends.
//!
//! Every model call in the loop goes through [`ChatBackend`]. Three
//! implementations exist and are interchangeable through [`BackendConfig`]:
//!
//! * [`ScriptedBackend`]: regex rules over the final user message,
//! * [`ReplayBackend`]: answers from a recorded JSONL transcript,
//! * [`HttpBackend`]: an OpenAI-compatible `/chat/completions` endpoint.
//!
//! Wrapping any backend with [`Transcript::wrap`] records each exchange.

mod http;
mod replay;
mod scripted;
pub mod stub;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, DEFAULT_API_KEY_ENV};
pub use replay::{record_session, RecordingBackend, ReplayBackend, Transcript, TranscriptRecord};
pub use scripted::{ScriptedBackend, ScriptedRule};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no recorded response for request digest {0}")]
    ReplayMiss(String),
    #[error("no scripted rule matched the final user message")]
    NoRuleMatched,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("bad backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    /// PNG payloads.
    #[serde(default, skip_serializing_if = "Vec::is_empty", with = "b64_list")]
    pub images: Vec<Vec<u8>>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, text: text.into(), images: Vec::new() }
    }

    pub fn user(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, text: text.into(), images: Vec::new() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, text: text.into(), images: Vec::new() }
    }

    pub fn with_image(mut self, png: Vec<u8>) -> Self {
        self.images.push(png);
        self
    }
}

mod b64_list {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|b| STANDARD.encode(b)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|s| STANDARD.decode(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Checks the structural contract every backend relies on.
pub fn validate_request(messages: &[ChatMessage]) -> Result<(), BackendError> {
    let first = messages
        .first()
        .ok_or_else(|| BackendError::InvalidRequest("no messages".into()))?;
    if first.role != Role::System {
        return Err(BackendError::InvalidRequest("first message must be a system message".into()));
    }
    for (i, m) in messages.iter().enumerate() {
        if m.role == Role::System && !m.images.is_empty() {
            return Err(BackendError::InvalidRequest(format!("system message {i} carries images")));
        }
        if m.text.is_empty() && m.images.is_empty() {
            return Err(BackendError::InvalidRequest(format!("message {i} is empty")));
        }
    }
    Ok(())
}

/// Stable digest of a request: roles, texts and image content hashes.
pub fn request_digest(messages: &[ChatMessage]) -> String {
    #[derive(Serialize)]
    struct Canon<'a> {
        role: &'a str,
        text: &'a str,
        images: Vec<String>,
    }
    let canon: Vec<Canon<'_>> = messages
        .iter()
        .map(|m| Canon {
            role: m.role.as_str(),
            text: &m.text,
            images: m.images.iter().map(|img| hex::encode(Sha256::digest(img))).collect(),
        })
        .collect();
    let bytes = serde_json::to_vec(&canon).expect("canonical request serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn final_user_text(messages: &[ChatMessage]) -> Option<&str> {
    messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.text.as_str())
}

pub trait ChatBackend: Send + Sync {
    fn id(&self) -> &str;

    /// Sends `messages` and returns the model's reply text.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        (**self).complete(messages)
    }
}

/// One request/response pair, as observed by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatExchange {
    pub request: Vec<ChatMessage>,
    pub response_text: String,
    pub backend_id: String,
    pub latency: Duration,
}

/// Validates, calls the backend and times the round trip.
pub fn complete(messages: &[ChatMessage], backend: &dyn ChatBackend) -> Result<ChatExchange, BackendError> {
    validate_request(messages)?;
    let started = std::time::Instant::now();
    let response_text = backend.complete(messages)?;
    if response_text.is_empty() {
        return Err(BackendError::BackendUnavailable(format!("{} returned an empty response", backend.id())));
    }
    Ok(ChatExchange {
        request: messages.to_vec(),
        response_text,
        backend_id: backend.id().to_string(),
        latency: started.elapsed(),
    })
}

/// Backend selection as plain data, so switching backends is a config change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Scripted { rules: PathBuf },
    Replay { transcript: PathBuf },
    Http(HttpConfig),
}

impl BackendConfig {
    pub fn build(&self) -> Result<Arc<dyn ChatBackend>, BackendError> {
        Ok(match self {
            BackendConfig::Scripted { rules } => Arc::new(ScriptedBackend::from_path(rules)?),
            BackendConfig::Replay { transcript } => Arc::new(ReplayBackend::from_path(transcript)?),
            BackendConfig::Http(cfg) => Arc::new(HttpBackend::new(cfg.clone())?),
        })
    }
}
