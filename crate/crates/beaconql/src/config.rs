//! TOML configuration for providers and the service.

use std::path::{Path, PathBuf};
use std::time::Duration;

use beaconql_core::draft::Workflow;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    OpenaiCompatible,
    OllamaCompatible,
    Mock,
}

fn default_timeout() -> f64 {
    60.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model: String,
    /// Inline key. Prefer `api_key_env`.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    /// Environment variable holding the key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "yes")]
    pub json_mode: bool,
    /// JSON file with a mock script; the shipped script is used when absent.
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
}

impl std::fmt::Debug for ProviderConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderConfig")
            .field("kind", &self.kind)
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("api_key_env", &self.api_key_env)
            .field("timeout_secs", &self.timeout_secs)
            .field("json_mode", &self.json_mode)
            .field("mock_script", &self.mock_script)
            .finish()
    }
}

impl ProviderConfig {
    pub fn mock() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            base_url: None,
            model: "mock".into(),
            api_key: None,
            api_key_env: None,
            timeout_secs: default_timeout(),
            json_mode: true,
            mock_script: None,
        }
    }

    pub fn http(kind: ProviderKind, base_url: impl Into<String>, model: impl Into<String>) -> Self {
        ProviderConfig { kind, base_url: Some(base_url.into()), model: model.into(), ..ProviderConfig::mock() }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ConfigError::Invalid("timeout_secs must be positive".into()));
        }
        if self.kind != ProviderKind::Mock && self.base_url.as_deref().is_none_or(|u| u.trim().is_empty()) {
            return Err(ConfigError::Invalid("base_url is required for HTTP providers".into()));
        }
        Ok(())
    }

    /// The inline key, else the value of `api_key_env`.
    pub fn resolve_key(&self) -> Option<String> {
        self.api_key
            .clone()
            .or_else(|| self.api_key_env.as_deref().and_then(|var| std::env::var(var).ok()))
            .filter(|k| !k.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticsConfig {
    /// Guest interpreter; probed from `BEACONQL_PYTHON` and `PATH` when absent.
    #[serde(default)]
    pub interpreter: Option<PathBuf>,
    #[serde(default = "AnalyticsConfig::default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "AnalyticsConfig::default_cap")]
    pub output_cap_bytes: usize,
    #[serde(default)]
    pub sandbox_root: Option<PathBuf>,
    #[serde(default)]
    pub aliases: Option<Vec<String>>,
    #[serde(default)]
    pub deny_names: Option<Vec<String>>,
}

impl AnalyticsConfig {
    fn default_timeout() -> f64 {
        30.0
    }

    fn default_cap() -> usize {
        32 << 20
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn guard(&self) -> beaconql_core::guard::GuardConfig {
        let mut guard = beaconql_core::guard::GuardConfig::default();
        if let Some(aliases) = &self.aliases {
            guard.aliases = aliases.clone();
        }
        if let Some(deny) = &self.deny_names {
            guard.deny_names = deny.clone();
        }
        guard
    }
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            interpreter: None,
            timeout_secs: Self::default_timeout(),
            output_cap_bytes: Self::default_cap(),
            sandbox_root: None,
            aliases: None,
            deny_names: None,
        }
    }
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_workflow() -> Workflow {
    Workflow::Parallel
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    pub beacon_endpoint: String,
    #[serde(default = "default_workflow")]
    pub workflow: Workflow,
    pub provider: ProviderConfig,
    #[serde(default)]
    pub analytics: AnalyticsConfig,
    /// Directory for per-session JSONL event logs.
    #[serde(default)]
    pub event_log_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ServiceConfig = toml::from_str(text)?;
        config.provider.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml(&text)
    }
}

pub fn load_provider(path: &Path) -> Result<ProviderConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    let config: ProviderConfig = toml::from_str(&text)?;
    config.validate()?;
    Ok(config)
}
