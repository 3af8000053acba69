//! `replay:PATH`, `echo`, `synthetic[:k=v,...]` and `http:URL`.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use flowdsl::backends::{
    Backend, HttpBackend, HttpConfig, LatencyModel, Pacing, ReplayBackend, ReplayEntry, SyntheticBackend,
    SyntheticConfig,
};
use flowdsl::catalog::Catalog;
use flowdsl::eval::EvalRecord;

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Replay(PathBuf),
    /// Answers each eval record with its own ground truth.
    Echo,
    Synthetic(SyntheticParams),
    Http(HttpConfig),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntheticParams {
    pub config: SyntheticConfig,
    /// Realtime pacing was requested explicitly.
    pub time_scale: Option<f64>,
    pub capacity_rpm: Option<f64>,
    /// Falls back to the global seed when unset.
    pub seed: Option<u64>,
}

impl FromStr for BackendSpec {
    type Err = anyhow::Error;

    fn from_str(spec: &str) -> anyhow::Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match kind {
            "replay" if !rest.is_empty() => Ok(Self::Replay(PathBuf::from(rest))),
            "echo" if rest.is_empty() => Ok(Self::Echo),
            "synthetic" => parse_synthetic(rest).map(Self::Synthetic),
            "http" if !rest.is_empty() => Ok(Self::Http(HttpConfig::new(rest))),
            _ => bail!(
                "unrecognized backend {spec:?}; expected replay:PATH, echo, synthetic[:k=v,...] or http:URL"
            ),
        }
    }
}

fn parse_synthetic(params: &str) -> anyhow::Result<SyntheticParams> {
    let mut out = SyntheticParams::default();
    let mut latency = out.config.latency;
    for pair in params.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got {pair:?}"))?;
        let number = || -> anyhow::Result<f64> {
            value
                .parse::<f64>()
                .with_context(|| format!("{key} expects a number, got {value:?}"))
        };
        match key {
            "p_fail" => out.config.p_fail = number()?,
            "p_halluc" => out.config.p_halluc = number()?,
            "seed" => out.seed = Some(value.parse().with_context(|| format!("bad seed {value:?}"))?),
            "max_actions" => {
                out.config.max_actions = value
                    .parse()
                    .with_context(|| format!("bad max_actions {value:?}"))?
            }
            "latency" => latency = LatencyModel::constant(number()?),
            "base" => latency.base_s = number()?,
            "per_token" => latency.per_token_s = number()?,
            "jitter" => latency.jitter_s = number()?,
            "time_scale" => out.time_scale = Some(number()?),
            "capacity" => out.capacity_rpm = Some(number()?),
            _ => bail!("unknown synthetic parameter {key:?}"),
        }
    }
    out.config.latency = latency;
    if let Some(time_scale) = out.time_scale {
        out.config.pacing = Pacing::Realtime {
            time_scale,
            capacity_rpm: out.capacity_rpm,
        };
    } else if out.capacity_rpm.is_some() {
        out.config.pacing = Pacing::Realtime {
            time_scale: 1.0,
            capacity_rpm: out.capacity_rpm,
        };
    }
    out.config.validate()?;
    Ok(out)
}

impl BackendSpec {
    /// `records` feeds the echo backend; `seed` applies to synthetic
    /// backends whose spec left it unset.
    pub fn build(
        &self,
        catalog: &Arc<Catalog>,
        records: &[EvalRecord],
        seed: u64,
    ) -> anyhow::Result<Arc<dyn Backend>> {
        Ok(match self {
            Self::Replay(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Arc::new(ReplayBackend::from_jsonl(&text, true)?)
            }
            Self::Echo => {
                if records.is_empty() {
                    bail!("the echo backend needs a test set");
                }
                let entries = records.iter().enumerate().map(|(i, r)| ReplayEntry {
                    key: r.id.clone().unwrap_or_else(|| i.to_string()),
                    completion: r.ground_truth_dsl.clone(),
                });
                Arc::new(ReplayBackend::from_entries(entries, true))
            }
            Self::Synthetic(params) => {
                let mut config = params.config.clone();
                config.seed = params.seed.unwrap_or(seed);
                Arc::new(SyntheticBackend::new(Arc::clone(catalog), config)?)
            }
            Self::Http(config) => Arc::new(HttpBackend::new(config)?),
        })
    }
}
