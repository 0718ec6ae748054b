//! HTTP chat providers (OpenAI-compatible and Ollama-compatible wire formats).

use std::sync::Arc;
use std::time::{Duration, Instant};

use beaconql_core::llm::{ChatProvider, FailureReason, MockProvider, MockScript, RawCompletion, ResponseFormat, Usage};
use serde_json::{json, Value};

use crate::config::{ConfigError, ProviderConfig, ProviderKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wire {
    OpenAi,
    Ollama,
}

pub struct HttpProvider {
    wire: Wire,
    base_url: String,
    model: String,
    api_key: Option<String>,
    json_mode: bool,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("wire", &self.wire)
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn new(wire: Wire, base_url: &str, model: &str, api_key: Option<String>, timeout: Duration, json_mode: bool) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider {
            wire,
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            json_mode,
            agent,
        }
    }

    fn request(&self, prompt: &str, format: ResponseFormat) -> (String, Value) {
        let messages = json!([{ "role": "user", "content": prompt }]);
        let json = self.json_mode && format == ResponseFormat::Json;
        match self.wire {
            Wire::OpenAi => {
                let mut body = json!({ "model": self.model, "messages": messages });
                if json {
                    body["response_format"] = json!({ "type": "json_object" });
                }
                (format!("{}/chat/completions", self.base_url), body)
            }
            Wire::Ollama => {
                let mut body = json!({ "model": self.model, "messages": messages, "stream": false });
                if json {
                    body["format"] = json!("json");
                }
                (format!("{}/api/chat", self.base_url), body)
            }
        }
    }

    fn read(&self, body: &Value) -> Option<(String, Option<Usage>)> {
        let count = |v: &Value| v.as_u64();
        match self.wire {
            Wire::OpenAi => {
                let text = body.pointer("/choices/0/message/content")?.as_str()?.to_string();
                let usage = body.get("usage").and_then(|u| {
                    Some(Usage { prompt_tokens: count(u.get("prompt_tokens")?)?, completion_tokens: count(u.get("completion_tokens")?)? })
                });
                Some((text, usage))
            }
            Wire::Ollama => {
                let text = body.pointer("/message/content")?.as_str()?.to_string();
                let usage = match (body.get("prompt_eval_count").and_then(count), body.get("eval_count").and_then(count)) {
                    (Some(p), Some(c)) => Some(Usage { prompt_tokens: p, completion_tokens: c }),
                    _ => None,
                };
                Some((text, usage))
            }
        }
    }
}

pub fn map_transport_error(error: &ureq::Error) -> FailureReason {
    match error {
        ureq::Error::Timeout(_) => FailureReason::Timeout,
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => FailureReason::Timeout,
        ureq::Error::StatusCode(status) => map_status(*status).unwrap_or(FailureReason::HttpStatus(*status)),
        ureq::Error::Json(_) => FailureReason::BadResponse,
        _ => FailureReason::Unreachable,
    }
}

/// Failure for a non-success status, `None` for 2xx.
pub fn map_status(status: u16) -> Option<FailureReason> {
    match status {
        200..=299 => None,
        401 | 403 => Some(FailureReason::AuthFailure),
        429 => Some(FailureReason::RateLimited),
        408 | 504 => Some(FailureReason::Timeout),
        other => Some(FailureReason::HttpStatus(other)),
    }
}

impl ChatProvider for HttpProvider {
    fn send(&self, prompt: &str, format: ResponseFormat) -> Result<RawCompletion, FailureReason> {
        let started = Instant::now();
        let (url, body) = self.request(prompt, format);
        let mut request = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| map_transport_error(&e))?;
        if let Some(failure) = map_status(response.status().as_u16()) {
            return Err(failure);
        }
        let value: Value = response.body_mut().read_json().map_err(|e| map_transport_error(&e))?;
        let (text, usage) = self.read(&value).ok_or(FailureReason::BadResponse)?;
        Ok(RawCompletion { text, usage, elapsed: started.elapsed() })
    }
}

/// Builds the provider described by `config`.
pub fn build_provider(config: &ProviderConfig) -> Result<Arc<dyn ChatProvider>, ConfigError> {
    config.validate()?;
    let base = config.base_url.as_deref().unwrap_or_default();
    Ok(match config.kind {
        ProviderKind::OpenaiCompatible => Arc::new(HttpProvider::new(
            Wire::OpenAi,
            base,
            &config.model,
            config.resolve_key(),
            config.timeout(),
            config.json_mode,
        )),
        ProviderKind::OllamaCompatible => Arc::new(HttpProvider::new(
            Wire::Ollama,
            base,
            &config.model,
            config.resolve_key(),
            config.timeout(),
            config.json_mode,
        )),
        ProviderKind::Mock => {
            let script = match &config.mock_script {
                Some(path) => load_mock_script(path)?,
                None => crate::mocks::shipped_script(),
            };
            Arc::new(MockProvider::new(script))
        }
    })
}

pub fn load_mock_script(path: &std::path::Path) -> Result<MockScript, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("mock script {}: {e}", path.display())))
}
