use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{count_tokens, prompt_key, Backend, BackendError, GenerationRequest, GenerationResult};

/// Entry served when neither the request id nor the prompt digest match.
pub const FALLBACK_KEY: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub key: String,
    pub completion: String,
}

/// Canned completions looked up by request id, then by prompt digest, then
/// by the `*` fallback entry.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    entries: HashMap<String, String>,
    strict: bool,
}

impl ReplayBackend {
    /// Later duplicates of a key replace earlier ones.
    pub fn from_entries(entries: impl IntoIterator<Item = ReplayEntry>, strict: bool) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.key, e.completion)).collect(),
            strict,
        }
    }

    pub fn from_jsonl(document: &str, strict: bool) -> Result<Self, BackendError> {
        let mut entries = Vec::new();
        for (index, line) in document.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry = serde_json::from_str(line)
                .map_err(|e| BackendError::Config(format!("replay line {}: {e}", index + 1)))?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries, strict))
    }

    /// A backend that answers every request with `completion`.
    pub fn constant(completion: impl Into<String>) -> Self {
        Self::from_entries(
            [ReplayEntry {
                key: FALLBACK_KEY.into(),
                completion: completion.into(),
            }],
            true,
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup(&self, request: &GenerationRequest) -> Option<&str> {
        self.entries
            .get(&request.id)
            .or_else(|| self.entries.get(&prompt_key(&request.prompt)))
            .or_else(|| self.entries.get(FALLBACK_KEY))
            .map(String::as_str)
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    /// Non-strict replay answers unknown keys with an empty completion.
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.validate()?;
        let text = match self.lookup(request) {
            Some(text) => text,
            None if self.strict => return Err(BackendError::UnknownKey(request.id.clone())),
            None => "",
        };
        Ok(GenerationResult {
            text: text.to_owned(),
            prompt_tokens: count_tokens(&request.prompt) as u32,
            completion_tokens: count_tokens(text) as u32,
            latency_s: 0.0,
        })
    }
}
