//! Provider-neutral chat completion types and the scripted mock provider.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign};
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::template::RenderedPrompt;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn total(self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    /// Whitespace-word approximation used when a provider reports nothing.
    pub fn estimate(prompt: &str, completion: &str) -> Self {
        Usage { prompt_tokens: count_tokens(prompt), completion_tokens: count_tokens(completion) }
    }
}

impl Add for Usage {
    type Output = Usage;

    fn add(self, rhs: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
        }
    }
}

impl AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        *self = *self + rhs;
    }
}

impl core::iter::Sum for Usage {
    fn sum<I: Iterator<Item = Usage>>(iter: I) -> Usage {
        iter.fold(Usage::default(), Add::add)
    }
}

pub fn count_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    /// Transport succeeded; the text has not been checked against a schema yet.
    Pending,
    Ok,
    DecodeFailed,
    TransportFailed,
}

/// Why a completion produced no text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Timeout,
    AuthFailure,
    RateLimited,
    Unreachable,
    HttpStatus(u16),
    BadResponse,
}

impl FailureReason {
    pub fn code(&self) -> String {
        match self {
            FailureReason::Timeout => "timeout".into(),
            FailureReason::AuthFailure => "auth_failure".into(),
            FailureReason::RateLimited => "rate_limited".into(),
            FailureReason::Unreachable => "unreachable".into(),
            FailureReason::HttpStatus(status) => alloc::format!("http_{status}"),
            FailureReason::BadResponse => "bad_response".into(),
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    Text,
    Json,
}

/// One prompt/response round trip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub prompt: RenderedPrompt,
    pub raw_text: String,
    pub usage: Usage,
    pub decode_status: DecodeStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureReason>,
    pub latency: Duration,
}

impl LlmExchange {
    pub fn transport_failed(prompt: RenderedPrompt, reason: FailureReason, latency: Duration) -> Self {
        LlmExchange {
            prompt,
            raw_text: String::new(),
            usage: Usage::default(),
            decode_status: DecodeStatus::TransportFailed,
            failure: Some(reason),
            latency,
        }
    }

    pub fn is_transport_failure(&self) -> bool {
        self.decode_status == DecodeStatus::TransportFailed
    }

    /// Reason code for a failed exchange, suitable for a field status.
    pub fn failure_code(&self) -> Option<String> {
        match self.decode_status {
            DecodeStatus::TransportFailed => Some(self.failure.as_ref().map_or("transport".into(), FailureReason::code)),
            DecodeStatus::DecodeFailed => Some("decode_failed".into()),
            _ => None,
        }
    }
}

/// Text returned by a provider before any decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCompletion {
    pub text: String,
    pub usage: Option<Usage>,
    pub elapsed: Duration,
}

/// A chat backend. Implementations only move text; [`complete`] owns the
/// retry policy and the accounting.
pub trait ChatProvider: Send + Sync {
    fn send(&self, prompt: &str, format: ResponseFormat) -> Result<RawCompletion, FailureReason>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for alloc::sync::Arc<P> {
    fn send(&self, prompt: &str, format: ResponseFormat) -> Result<RawCompletion, FailureReason> {
        (**self).send(prompt, format)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn send(&self, prompt: &str, format: ResponseFormat) -> Result<RawCompletion, FailureReason> {
        (**self).send(prompt, format)
    }
}

/// Runs one completion. Transport failures come back as data; a timeout is
/// retried exactly once.
pub fn complete(provider: &dyn ChatProvider, prompt: &RenderedPrompt, format: ResponseFormat) -> LlmExchange {
    let mut spent = Duration::ZERO;
    let mut attempt = provider.send(&prompt.text, format);
    if let Err(FailureReason::Timeout) = attempt {
        attempt = provider.send(&prompt.text, format);
    }
    match attempt {
        Ok(raw) => {
            spent += raw.elapsed;
            let usage = raw.usage.unwrap_or_else(|| Usage::estimate(&prompt.text, &raw.text));
            LlmExchange {
                prompt: prompt.clone(),
                raw_text: raw.text,
                usage,
                decode_status: DecodeStatus::Pending,
                failure: None,
                latency: spent,
            }
        }
        Err(reason) => LlmExchange::transport_failed(prompt.clone(), reason, spent),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockReply {
    Text(String),
    Fail(FailureReason),
}

/// Matches when the prompt contains every listed substring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub all_of: Vec<String>,
    pub reply: MockReply,
}

impl MockRule {
    pub fn new<S: AsRef<str>>(all_of: &[S], reply: MockReply) -> Self {
        MockRule { all_of: all_of.iter().map(|s| s.as_ref().to_string()).collect(), reply }
    }

    pub fn text<S: AsRef<str>>(all_of: &[S], text: impl Into<String>) -> Self {
        Self::new(all_of, MockReply::Text(text.into()))
    }

    pub fn fail<S: AsRef<str>>(all_of: &[S], reason: FailureReason) -> Self {
        Self::new(all_of, MockReply::Fail(reason))
    }

    pub fn matches(&self, prompt: &str) -> bool {
        self.all_of.iter().all(|needle| prompt.contains(needle.as_str()))
    }
}

/// Ordered, first-match-wins canned responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    pub default: MockReply,
}

impl MockScript {
    pub fn new(default: MockReply) -> Self {
        MockScript { rules: Vec::new(), default }
    }

    pub fn with_rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }

    /// Puts `rule` ahead of all existing rules (fault injection).
    pub fn with_override(mut self, rule: MockRule) -> Self {
        self.rules.insert(0, rule);
        self
    }

    pub fn respond(&self, prompt: &str) -> &MockReply {
        self.rules
            .iter()
            .find(|rule| rule.matches(prompt))
            .map_or(&self.default, |rule| &rule.reply)
    }
}

/// Offline provider backed by a [`MockScript`]. Usage is left to the
/// whitespace estimate.
#[derive(Debug, Clone)]
pub struct MockProvider {
    script: MockScript,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        MockProvider { script }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl ChatProvider for MockProvider {
    fn send(&self, prompt: &str, _format: ResponseFormat) -> Result<RawCompletion, FailureReason> {
        match self.script.respond(prompt) {
            MockReply::Text(text) => Ok(RawCompletion { text: text.clone(), usage: None, elapsed: Duration::ZERO }),
            MockReply::Fail(reason) => Err(reason.clone()),
        }
    }
}
