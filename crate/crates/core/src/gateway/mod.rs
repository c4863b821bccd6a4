//! Completion backends behind one contract, plus parsers that turn raw model
//! text into domain values.
//!
//! Providers only move text. Everything that can be enforced without trusting
//! a provider (timeouts, retries, latency measurement, output caps) lives in
//! [`complete`].

mod http;
mod parse;
mod scripted;

use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptPayload;

pub use http::ChatCompletionsProvider;
pub use parse::{
    locate_span, parse_criteria_list, parse_feedback, parse_rewrite, parse_simulated_answer,
    parse_verdict, NotFound, ParseError, ScalarRange,
};
pub use scripted::{make_scripted_provider, Matcher, ScriptEntry, ScriptTable, ScriptedProvider, ServedCall};

/// Errors a provider reports for a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    /// Connection, 5xx, rate limiting and similar transient faults.
    #[error("transport error: {0}")]
    Transport(String),
    /// The backend answered but declined the request (4xx).
    #[error("request rejected with status {status}: {message}")]
    Rejected { status: u16, message: String },
    /// A well-formed refusal from the model itself.
    #[error("model refused: {0}")]
    Refused(String),
    #[error("backend returned a malformed body: {0}")]
    InvalidResponse(String),
    #[error("no script entry matches template {template} (fingerprint {fingerprint})")]
    ScriptMiss { template: String, fingerprint: String },
    #[error("{count} script entries match template {template}; strict scripts need exactly one")]
    ScriptAmbiguous { template: String, count: usize },
}

impl ProviderError {
    /// Only transport-class faults are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transport(_))
    }
}

/// A pluggable completion backend.
#[async_trait]
pub trait LlmProvider: Send + Sync {
    fn id(&self) -> &str;

    async fn complete(
        &self,
        payload: &PromptPayload,
        params: &GenerationParams,
    ) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_output_chars: usize,
    pub timeout_ms: u64,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid generation parameter: {0}")]
pub struct InvalidParams(pub &'static str);

impl GenerationParams {
    pub fn new(
        temperature: f64,
        max_output_chars: usize,
        timeout_ms: u64,
        retries: u32,
    ) -> Result<Self, InvalidParams> {
        let params = Self {
            temperature,
            max_output_chars,
            timeout_ms,
            retries,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), InvalidParams> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(InvalidParams("temperature must be within [0, 2]"));
        }
        if self.max_output_chars == 0 {
            return Err(InvalidParams("max_output_chars must be positive"));
        }
        if self.timeout_ms == 0 {
            return Err(InvalidParams("timeout_ms must be positive"));
        }
        Ok(())
    }
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.2,
            max_output_chars: 20_000,
            timeout_ms: 30_000,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub provider_id: String,
    /// Wall-clock time from first dispatch to final answer, retries included.
    pub latency_ms: u64,
    /// Number of attempts made; `attempts - 1` retries preceded the answer.
    pub attempts: u32,
}

impl Completion {
    /// A completion that did not come from a provider call; handy for parsing.
    pub fn from_text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            provider_id: String::new(),
            latency_ms: 0,
            attempts: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("refusing to send an empty prompt")]
    EmptyPayload,
    #[error("provider timed out on all {attempts} attempts ({timeout_ms} ms each)")]
    ProviderTimeout { attempts: u32, timeout_ms: u64 },
    #[error("provider unavailable after {attempts} attempts: {source}")]
    ProviderUnavailable {
        attempts: u32,
        #[source]
        source: ProviderError,
    },
    #[error("completion has {len} characters, limit is {max}")]
    OutputTooLong { len: usize, max: usize },
}

impl GatewayError {
    pub fn name(&self) -> &'static str {
        match self {
            GatewayError::EmptyPayload => "EmptyPayload",
            GatewayError::ProviderTimeout { .. } => "ProviderTimeout",
            GatewayError::ProviderUnavailable { .. } => "ProviderUnavailable",
            GatewayError::OutputTooLong { .. } => "OutputTooLong",
        }
    }
}

/// Sends `payload` to `provider`, bounding each attempt by `timeout_ms` and
/// retrying transport-class failures up to `retries` times.
pub async fn complete(
    provider: &dyn LlmProvider,
    payload: &PromptPayload,
    params: &GenerationParams,
) -> Result<Completion, GatewayError> {
    if payload.is_empty() {
        return Err(GatewayError::EmptyPayload);
    }
    let started = Instant::now();
    let per_attempt = Duration::from_millis(params.timeout_ms);
    let max_attempts = params.retries.saturating_add(1);
    let mut last_error = None;

    for attempt in 1..=max_attempts {
        match tokio::time::timeout(per_attempt, provider.complete(payload, params)).await {
            Ok(Ok(text)) => {
                let len = text.chars().count();
                if len > params.max_output_chars {
                    return Err(GatewayError::OutputTooLong {
                        len,
                        max: params.max_output_chars,
                    });
                }
                return Ok(Completion {
                    text,
                    provider_id: provider.id().to_string(),
                    latency_ms: started.elapsed().as_millis() as u64,
                    attempts: attempt,
                });
            }
            Ok(Err(err)) if err.is_retryable() => {
                tracing::warn!(
                    provider = provider.id(),
                    template = %payload.template_name,
                    attempt,
                    error = %err,
                    "retrying completion"
                );
                last_error = Some(err);
            }
            Ok(Err(err)) => {
                return Err(GatewayError::ProviderUnavailable {
                    attempts: attempt,
                    source: err,
                })
            }
            Err(_) => {
                tracing::warn!(
                    provider = provider.id(),
                    template = %payload.template_name,
                    attempt,
                    timeout_ms = params.timeout_ms,
                    "completion attempt timed out"
                );
                last_error = None;
            }
        }
    }

    Err(match last_error {
        Some(source) => GatewayError::ProviderUnavailable {
            attempts: max_attempts,
            source,
        },
        None => GatewayError::ProviderTimeout {
            attempts: max_attempts,
            timeout_ms: params.timeout_ms,
        },
    })
}

/// The evaluator's judgement of whether a question conveyed its criteria.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessVerdict {
    pub fair: bool,
    pub rationale: String,
}
