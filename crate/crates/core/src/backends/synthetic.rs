use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{count_tokens, truncate_to_tokens, Backend, BackendError, GenerationRequest, GenerationResult};
use crate::catalog::{Catalog, OperationSignature, COMMON_TRIGGER_CONNECTOR};

const HALLUCINATED_CONNECTOR: &str = "shared_unlisted";

/// latency = base + per_token × completion_tokens + U[0, jitter)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub base_s: f64,
    pub per_token_s: f64,
    pub jitter_s: f64,
}

impl LatencyModel {
    pub fn constant(seconds: f64) -> Self {
        Self {
            base_s: seconds,
            per_token_s: 0.0,
            jitter_s: 0.0,
        }
    }
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            base_s: 0.8,
            per_token_s: 0.01,
            jitter_s: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pacing {
    /// Latency is reported but never slept.
    #[default]
    Simulated,
    /// Sleeps `latency / time_scale` of wall time per call. With a capacity
    /// set, calls beyond `capacity_rpm` in the trailing nominal minute are
    /// rejected with status 429.
    Realtime {
        time_scale: f64,
        capacity_rpm: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub p_fail: f64,
    pub p_halluc: f64,
    pub latency: LatencyModel,
    pub seed: u64,
    pub max_actions: usize,
    pub pacing: Pacing,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            p_fail: 0.0,
            p_halluc: 0.0,
            latency: LatencyModel::default(),
            seed: 0,
            max_actions: 3,
            pacing: Pacing::Simulated,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let probability = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(BackendError::Config(format!("{name} = {p} is outside [0, 1]")))
            }
        };
        probability("p_fail", self.p_fail)?;
        probability("p_halluc", self.p_halluc)?;
        let l = &self.latency;
        if [l.base_s, l.per_token_s, l.jitter_s]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(BackendError::Config(
                "latency parameters must be finite and >= 0".into(),
            ));
        }
        if self.max_actions == 0 {
            return Err(BackendError::Config("max_actions must be positive".into()));
        }
        if let Pacing::Realtime {
            time_scale,
            capacity_rpm,
        } = self.pacing
        {
            if !(time_scale.is_finite() && time_scale > 0.0) {
                return Err(BackendError::Config("time_scale must be positive".into()));
            }
            if capacity_rpm.is_some_and(|c| c.is_nan() || c <= 0.0) {
                return Err(BackendError::Config("capacity_rpm must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Catalog-driven flow generator with seeded fault injection.
///
/// Every call derives its own RNG from `(seed, request id)`, so the output
/// for a request does not depend on call order or thread scheduling.
pub struct SyntheticBackend {
    config: SyntheticConfig,
    catalog: Arc<Catalog>,
    triggers: Vec<OperationSignature>,
    actions: Vec<OperationSignature>,
    started: Instant,
    // nominal admission times inside the trailing minute
    admitted: Mutex<VecDeque<f64>>,
}

impl SyntheticBackend {
    pub fn new(catalog: Arc<Catalog>, config: SyntheticConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let mut triggers: Vec<_> = catalog.triggers().cloned().collect();
        if triggers.is_empty() {
            triggers.push(OperationSignature::trigger(COMMON_TRIGGER_CONNECTOR, "Manual"));
        }
        let actions = catalog.actions().cloned().collect();
        Ok(Self {
            config,
            catalog,
            triggers,
            actions,
            started: Instant::now(),
            admitted: Mutex::new(VecDeque::new()),
        })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    fn rng_for(&self, request_id: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.config.seed.to_le_bytes());
        hasher.update(request_id.as_bytes());
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }

    /// An operation name on `connector` that the catalog does not hold.
    fn hallucinated_operation(&self, connector: &str, operation: &str) -> String {
        let mut candidate = format!("{operation}Hook");
        let mut n = 2;
        while self.catalog.contains(connector, &candidate)
            || self
                .actions
                .iter()
                .chain(&self.triggers)
                .any(|s| s.connector == connector && s.operation == candidate)
        {
            candidate = format!("{operation}Hook{n}");
            n += 1;
        }
        candidate
    }

    /// Draws the completion text for a request.
    pub fn completion_for(&self, request: &GenerationRequest) -> String {
        let mut rng = self.rng_for(&request.id);
        let trigger = &self.triggers[rng.gen_range(0..self.triggers.len())];
        let wanted = rng.gen_range(1..=self.config.max_actions);
        let mut calls: Vec<(String, String)> = if self.actions.is_empty() {
            Vec::new()
        } else {
            sample(&mut rng, self.actions.len(), wanted.min(self.actions.len()))
                .into_iter()
                .map(|i| {
                    (
                        self.actions[i].connector.clone(),
                        self.actions[i].operation.clone(),
                    )
                })
                .collect()
        };
        if rng.gen_bool(self.config.p_halluc) {
            if calls.is_empty() {
                // never on the trigger's connector: `commonTrigger` calls are always triggers
                let op = self.hallucinated_operation(HALLUCINATED_CONNECTOR, "Send");
                calls.push((HALLUCINATED_CONNECTOR.to_owned(), op));
            } else {
                let victim = rng.gen_range(0..calls.len());
                let (connector, operation) = &calls[victim];
                let renamed = self.hallucinated_operation(connector, operation);
                calls[victim].1 = renamed;
            }
        }

        let mut lines = vec![format!(
            "triggerOutputs = await {}.{}({{}});",
            trigger.connector, trigger.operation
        )];
        for (connector, operation) in &calls {
            lines.push(format!(
                "outputs_{connector}_{operation} = {connector}.{operation}({{ \"body\": triggerOutputs.body }});"
            ));
        }
        let mut text = lines.join("\n");
        if rng.gen_bool(self.config.p_fail) {
            let cut = text.rfind('(').expect("every statement has a call");
            text.truncate(cut + 1);
        }
        truncate_to_tokens(&text, request.max_tokens as usize).to_owned()
    }

    fn latency_for(&self, request: &GenerationRequest, completion_tokens: usize) -> f64 {
        let l = &self.config.latency;
        // separate stream from the completion draw
        let mut rng = self.rng_for(&format!("{}#latency", request.id));
        let jitter = if l.jitter_s > 0.0 {
            rng.gen_range(0.0..l.jitter_s)
        } else {
            0.0
        };
        l.base_s + l.per_token_s * completion_tokens as f64 + jitter
    }

    /// Admits the call against the trailing-minute capacity.
    fn admit(&self, time_scale: f64, capacity_rpm: f64) -> bool {
        let now = self.started.elapsed().as_secs_f64() * time_scale;
        let mut admitted = self.admitted.lock().expect("admission lock");
        while admitted.front().is_some_and(|t| now - t >= 60.0) {
            admitted.pop_front();
        }
        if (admitted.len() as f64) < capacity_rpm {
            admitted.push_back(now);
            true
        } else {
            false
        }
    }
}

impl Backend for SyntheticBackend {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.validate()?;
        let text = self.completion_for(request);
        let completion_tokens = count_tokens(&text);
        let latency_s = self.latency_for(request, completion_tokens);
        if let Pacing::Realtime {
            time_scale,
            capacity_rpm,
        } = self.config.pacing
        {
            if let Some(capacity) = capacity_rpm {
                if !self.admit(time_scale, capacity) {
                    // rejections cost the fixed part of a call
                    std::thread::sleep(Duration::from_secs_f64(self.config.latency.base_s / time_scale));
                    return Err(BackendError::Status {
                        status: 429,
                        body: "capacity exceeded".into(),
                    });
                }
            }
            std::thread::sleep(Duration::from_secs_f64(latency_s / time_scale));
        }
        Ok(GenerationResult {
            prompt_tokens: count_tokens(&request.prompt) as u32,
            completion_tokens: completion_tokens as u32,
            latency_s,
            text,
        })
    }
}
