use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsConfig;
use crate::proximity::PathLossParams;
use crate::signal::PipelineConfig;

/// Overrides `data_dir` from the config file.
pub const DATA_DIR_ENV: &str = "OPENBADGE_DATA_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HubConfig {
    pub data_dir: PathBuf,
    pub port: u16,
    pub pull_period_ms: u64,
    /// Range length used when a query gives neither `from` nor `window_ms`.
    pub default_window_ms: i64,
    /// Readings a pair needs inside a window before it gets a proximity edge.
    pub min_obs: usize,
    pub pipeline: PipelineConfig,
    pub metrics: MetricsConfig,
    pub path_loss: PathLossParams,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("openbadge-data"),
            port: 8080,
            pull_period_ms: 60_000,
            default_window_ms: 300_000,
            min_obs: 2,
            pipeline: PipelineConfig::default(),
            metrics: MetricsConfig::default(),
            path_loss: PathLossParams::default(),
        }
    }
}

impl HubConfig {
    pub fn with_data_dir(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Config file (if any), then the data-dir environment variable.
    pub fn resolve(path: Option<&Path>, env_data_dir: Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(dir) = env_data_dir.filter(|d| !d.is_empty()) {
            cfg.data_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pipeline
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.path_loss
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.pull_period_ms == 0 {
            return Err(ConfigError::Invalid(
                "pull_period_ms must be positive".into(),
            ));
        }
        if self.default_window_ms <= 0 {
            return Err(ConfigError::Invalid(
                "default_window_ms must be positive".into(),
            ));
        }
        let m = &self.metrics;
        if m.turn_gap_ms < 0
            || m.response_window_ms <= 0
            || m.rate_max.is_nan()
            || m.rate_max <= 0.0
        {
            return Err(ConfigError::Invalid(
                "metrics: turn_gap_ms >= 0, response_window_ms > 0, rate_max > 0".into(),
            ));
        }
        Ok(())
    }
}
