//! Model backends behind one request/response contract.
//!
//! * [`ReplayBackend`] serves canned completions keyed by request id or
//!   prompt digest.
//! * [`SyntheticBackend`] draws flows from a catalog with seeded error,
//!   hallucination and latency injection.
//! * [`HttpBackend`] posts to an external completion server.
//!
//! Backends are shared across worker threads, so every implementation is
//! `Send + Sync` and keeps per-call state on the stack.

mod http;
mod replay;
mod synthetic;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use http::{HttpBackend, HttpConfig};
pub use replay::{ReplayBackend, ReplayEntry, FALLBACK_KEY};
pub use synthetic::{LatencyModel, Pacing, SyntheticBackend, SyntheticConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub id: String,
    pub prompt: String,
    pub max_tokens: u32,
}

impl GenerationRequest {
    pub fn new(
        id: impl Into<String>,
        prompt: impl Into<String>,
        max_tokens: u32,
    ) -> Result<Self, BackendError> {
        let request = Self {
            id: id.into(),
            prompt: prompt.into(),
            max_tokens,
        };
        request.validate()?;
        Ok(request)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.is_empty() {
            return Err(BackendError::InvalidRequest("empty prompt".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    /// Seconds; measured for HTTP, modeled for synthetic, zero for replay.
    pub latency_s: f64,
}

/// Coarse failure classes used by the load tester.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Timeout,
    Transport,
    Non2xx,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no replay entry for key {0:?}")]
    UnknownKey(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("server answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    pub fn class(&self) -> ErrorClass {
        match self {
            BackendError::Timeout(_) => ErrorClass::Timeout,
            BackendError::Status { .. } => ErrorClass::Non2xx,
            _ => ErrorClass::Transport,
        }
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError>;
}

/// Hex SHA-256 of a prompt, the content key of replay files.
pub fn prompt_key(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Byte ranges of the approximate tokens: runs of alphanumerics and `_`,
/// and every other non-whitespace character on its own.
fn token_spans(text: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let word = |c: char| c.is_alphanumeric() || c == '_';
    let mut chars = text.char_indices().peekable();
    std::iter::from_fn(move || loop {
        let (start, c) = chars.next()?;
        if c.is_whitespace() {
            continue;
        }
        let mut end = start + c.len_utf8();
        if word(c) {
            while let Some(&(i, next)) = chars.peek() {
                if !word(next) {
                    break;
                }
                end = i + next.len_utf8();
                chars.next();
            }
        }
        return Some((start, end));
    })
}

pub fn count_tokens(text: &str) -> usize {
    token_spans(text).count()
}

/// Cuts `text` after its `limit`-th token.
pub fn truncate_to_tokens(text: &str, limit: usize) -> &str {
    match token_spans(text).nth(limit) {
        Some((start, _)) => text[..start].trim_end(),
        None => text,
    }
}
