//! Global settings: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUTPUT: &str = "flowdsl-out";

/// Settings as read from `--config`. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub catalog: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub backend: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct GlobalConfig {
    pub catalog: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub backend: Option<String>,
    pub seed: u64,
    pub output: PathBuf,
    pub workers: usize,
    pub k: usize,
    pub deterministic: bool,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub catalog: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub backend: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub deterministic: bool,
}

impl GlobalConfig {
    pub fn resolve(file: Option<&Path>, flags: Overrides) -> anyhow::Result<Self> {
        let from_file = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let config = Self {
            catalog: flags.catalog.or(from_file.catalog),
            corpus: flags.corpus.or(from_file.corpus),
            backend: flags.backend.or(from_file.backend),
            seed: flags.seed.or(from_file.seed).unwrap_or(DEFAULT_SEED),
            output: flags
                .output
                .or(from_file.output)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
            workers: from_file.workers.unwrap_or(1),
            k: from_file.k.unwrap_or(0),
            deterministic: flags.deterministic,
        };
        for path in [&config.catalog, &config.corpus].into_iter().flatten() {
            if !path.exists() {
                bail!("{} does not exist", path.display());
            }
        }
        if config.workers == 0 {
            bail!("workers must be at least 1");
        }
        Ok(config)
    }
}
