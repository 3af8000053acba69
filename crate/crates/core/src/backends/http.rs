use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, GenerationRequest, GenerationResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Server root; requests go to `{base_url}/v1/completions`.
    pub base_url: String,
    pub timeout_s: f64,
    pub pool_size: usize,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout_s: 30.0,
            pool_size: 32,
        }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
    prompt_tokens: u32,
    completion_tokens: u32,
}

/// Single-attempt client for a JSON completion endpoint. Every request
/// carries the configured timeout.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
}

impl HttpBackend {
    pub fn new(config: &HttpConfig) -> Result<Self, BackendError> {
        if !(config.timeout_s.is_finite() && config.timeout_s > 0.0) {
            return Err(BackendError::Config("timeout must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .connect_timeout(Duration::from_secs_f64(config.timeout_s))
            .pool_max_idle_per_host(config.pool_size)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/v1/completions", config.base_url.trim_end_matches('/')),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn classify(error: reqwest::Error) -> BackendError {
    if error.is_timeout() {
        BackendError::Timeout(error.to_string())
    } else {
        BackendError::Transport(error.to_string())
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.validate()?;
        let started = Instant::now();
        let response = self
            .client
            .post(&self.endpoint)
            .json(&CompletionRequest {
                prompt: &request.prompt,
                max_tokens: request.max_tokens,
            })
            .send()
            .map_err(classify)?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: response.text().unwrap_or_default(),
            });
        }
        let body: CompletionResponse = response.json().map_err(classify)?;
        Ok(GenerationResult {
            text: body.text,
            prompt_tokens: body.prompt_tokens,
            completion_tokens: body.completion_tokens,
            latency_s: started.elapsed().as_secs_f64(),
        })
    }
}
