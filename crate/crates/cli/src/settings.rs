//! Layering of command-line flags, environment and the config file.
//!
//! Clap already resolves flags over environment variables; values still
//! missing are taken from the flat TOML config file, then from defaults.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use relevance_core::{AverageMode, ModelType, OptimizerKind};
use serde::Deserialize;

use crate::cli::{DataFormat, OutputFormat};
use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Every key mirrors a long flag name.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<OneOrMany<PathBuf>>,
    pub format: Option<DataFormat>,
    pub map: Option<OneOrMany<String>>,
    pub embeddings: Option<PathBuf>,
    pub split: Option<String>,
    pub seed: Option<u64>,

    pub model: Option<ModelType>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub dropout: Option<f64>,
    pub recurrent_dropout: Option<f64>,
    pub filters: Option<usize>,
    pub kernel: Option<usize>,
    pub optimizer: Option<OptimizerKind>,
    pub hidden: Option<usize>,
    pub max_len: Option<usize>,

    pub delivery_size: Option<usize>,
    pub mode: Option<AverageMode>,
    pub max_iterations: Option<usize>,
    pub timing: Option<bool>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub report_format: Option<OutputFormat>,

    pub space: Option<PathBuf>,
    pub n_samples: Option<usize>,

    pub listen: Option<SocketAddr>,
    pub data_dir: Option<PathBuf>,
    pub max_batch: Option<usize>,
    pub trend_a: Option<f64>,
    pub trend_b: Option<f64>,

    pub rate: Option<f64>,
    pub target: Option<String>,
    pub limit: Option<usize>,
    pub retries: Option<u32>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))
    }
}

/// Flag value if given, else the config file's.
pub fn layer<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

pub fn layer_vec<T>(flag: Vec<T>, file: Option<OneOrMany<T>>) -> Vec<T> {
    if flag.is_empty() {
        file.map(OneOrMany::into_vec).unwrap_or_default()
    } else {
        flag
    }
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("--{flag} is required (flag, environment or config file)")))
}
