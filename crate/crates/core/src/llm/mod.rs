//! Chat-completion providers.
//!
//! Every model call in the crate goes through [`ChatProvider::complete`].
//! [`ScriptedBackend`] replays canned responses for tests and offline runs;
//! [`HttpProvider`] talks to OpenAI-compatible endpoints. [`Metered`] wraps
//! any provider and counts calls and prompt characters.

mod http;
mod scripted;
pub mod scripts;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use thiserror::Error;

pub use http::{HttpProvider, HttpProviderConfig};
pub use scripted::{ScriptEntry, ScriptReply, ScriptedBackend};

pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("provider error {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("no script entry matches prompt starting {prompt_head:?}")]
    ScriptExhausted { prompt_head: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl LlmError {
    /// Only rate limiting and transport failures are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::RateLimited(_) | LlmError::Transport(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f32,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// Temperature 0, default token budget.
    pub fn new(model_id: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    /// Characters (not bytes) in the submitted prompt.
    pub prompt_chars: usize,
    pub completion_chars: usize,
}

impl ChatResponse {
    pub fn for_prompt(prompt: &str, text: String) -> Self {
        Self {
            prompt_chars: prompt.chars().count(),
            completion_chars: text.chars().count(),
            text,
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;

    fn name(&self) -> &str;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before attempt `i + 2`; the last entry repeats.
    pub backoff: Vec<Duration>,
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_attempts: 1,
            backoff: Vec::new(),
        }
    }

    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            backoff: Vec::new(),
        }
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff: vec![Duration::from_millis(500), Duration::from_secs(2)],
        }
    }
}

/// Calls `provider` until success, a non-retryable error, or
/// `policy.max_attempts` attempts.
pub fn with_retry(
    provider: &dyn ChatProvider,
    request: &ChatRequest,
    policy: &RetryPolicy,
) -> Result<ChatResponse, LlmError> {
    let attempts = policy.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        match provider.complete(request) {
            Ok(response) => return Ok(response),
            Err(err) if err.is_retryable() && attempt + 1 < attempts => {
                let delay = policy
                    .backoff
                    .get(attempt as usize)
                    .or(policy.backoff.last())
                    .copied()
                    .unwrap_or_default();
                log::debug!(
                    "{} attempt {} failed ({err}); retrying in {delay:?}",
                    provider.name(),
                    attempt + 1
                );
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
                attempt += 1;
            }
            Err(err) => return Err(err),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MeterSnapshot {
    pub calls: usize,
    pub prompt_chars: usize,
    pub completion_chars: usize,
}

/// Shared call counter. Clones observe the same totals.
#[derive(Debug, Clone, Default)]
pub struct Meter(Arc<Mutex<MeterSnapshot>>);

impl Meter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> MeterSnapshot {
        self.0.lock().expect("meter lock").clone()
    }

    fn record(&self, prompt: &str, response: Option<&ChatResponse>) {
        let mut state = self.0.lock().expect("meter lock");
        state.calls += 1;
        state.prompt_chars += prompt.chars().count();
        if let Some(r) = response {
            state.completion_chars += r.completion_chars;
        }
    }
}

/// Provider wrapper that records every attempt in a [`Meter`].
pub struct Metered<P> {
    inner: P,
    meter: Meter,
}

impl<P: ChatProvider> Metered<P> {
    pub fn new(inner: P, meter: Meter) -> Self {
        Self { inner, meter }
    }
}

impl<P: ChatProvider> ChatProvider for Metered<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let result = self.inner.complete(request);
        self.meter.record(&request.prompt, result.as_ref().ok());
        result
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backend(entries: Vec<ScriptEntry>) -> ScriptedBackend {
        ScriptedBackend::new(entries)
    }

    #[test]
    fn retry_recovers_after_rate_limit() {
        let b = backend(vec![
            ScriptEntry::error("", ScriptReply::RateLimited),
            ScriptEntry::text("", "ok"),
        ]);
        let r = with_retry(&b, &ChatRequest::new("m", "hi"), &RetryPolicy::immediate(2)).unwrap();
        assert_eq!(r.text, "ok");
        assert_eq!(b.call_log().len(), 2);
    }

    #[test]
    fn provider_errors_are_not_retried() {
        let b = backend(vec![
            ScriptEntry::error("", ScriptReply::ProviderError(400)),
            ScriptEntry::text("", "never"),
        ]);
        let err =
            with_retry(&b, &ChatRequest::new("m", "hi"), &RetryPolicy::immediate(5)).unwrap_err();
        assert!(matches!(err, LlmError::Provider { status: 400, .. }));
        assert_eq!(b.call_log().len(), 1);
    }

    #[test]
    fn single_attempt_surfaces_rate_limit() {
        let b = backend(vec![ScriptEntry::error("", ScriptReply::RateLimited)]);
        let err =
            with_retry(&b, &ChatRequest::new("m", "hi"), &RetryPolicy::immediate(1)).unwrap_err();
        assert!(matches!(err, LlmError::RateLimited(_)));
    }

    #[test]
    fn exhausted_retries_surface_last_error() {
        let b = backend(vec![
            ScriptEntry::error("", ScriptReply::Transport),
            ScriptEntry::error("", ScriptReply::RateLimited),
        ]);
        let err =
            with_retry(&b, &ChatRequest::new("m", "hi"), &RetryPolicy::immediate(2)).unwrap_err();
        assert!(matches!(err, LlmError::RateLimited(_)));
    }

    #[test]
    fn meter_counts_calls_and_chars() {
        let meter = Meter::new();
        let b = Metered::new(
            backend(vec![ScriptEntry::text("", "abc"), ScriptEntry::text("", "de")]),
            meter.clone(),
        );
        b.complete(&ChatRequest::new("m", "héllo")).unwrap();
        b.complete(&ChatRequest::new("m", "xy")).unwrap();
        assert!(b.complete(&ChatRequest::new("m", "z")).is_err());
        let snap = meter.snapshot();
        assert_eq!(snap.calls, 3);
        assert_eq!(snap.prompt_chars, 5 + 2 + 1);
        assert_eq!(snap.completion_chars, 5);
    }

    #[test]
    fn request_validation() {
        assert!(ChatRequest::new("m", "").validate().is_err());
        let mut r = ChatRequest::new("m", "p");
        r.temperature = 1.5;
        assert!(r.validate().is_err());
        r.temperature = 0.7;
        assert!(r.validate().is_ok());
    }
}
