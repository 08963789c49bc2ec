//! Chat backends, prompt rendering and response parsing.

mod backend;
mod parse;
mod prompt;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    estimate_tokens, FnBackend, HttpBackend, HttpConfig, ScriptEntry, ScriptedBackend, API_KEY_ENV,
};
pub use parse::{
    first_json_object, parse_error_class, parse_llm_constraints, parse_llm_verification, parse_probe_decision,
    parse_probe_evaluations, parse_sql_answer, LlmIssue, LlmVerdict, ProbeAction, ProbeDecision, ProbeEvaluation,
};
pub use prompt::{
    base_vars, render_constraints, render_grounding, render_probe_history, render_prompt, render_schema,
    render_violations, PromptKind, PromptVars, CELL_CHAR_LIMIT, NONE_MARKER, PROBE_ROWS_SHOWN,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("backend error: {0}")]
    BackendError(String),
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("missing prompt placeholder `{0}`")]
    MissingPlaceholder(String),
    #[error("unparseable model output: {0}")]
    Unparseable(String),
    #[error("model returned no SQL")]
    EmptyAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub kind: PromptKind,
    pub text: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl ChatRequest {
    pub fn new(kind: PromptKind, text: impl Into<String>) -> Self {
        Self { kind, text: text.into(), temperature: 0.0, max_output_tokens: 2048 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub latency_seconds: f64,
    /// Token counts were estimated from text length, not reported.
    #[serde(default)]
    pub estimated: bool,
}

/// A chat-completion backend. Implementations must tolerate concurrent
/// calls; the scripted mock serialises internally.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    #[default]
    Mock,
}

/// Backend selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    pub script_path: Option<std::path::PathBuf>,
    pub request_timeout_seconds: f64,
    /// Passed through verbatim into the request body (for example, a
    /// provider's switch for extended reasoning).
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: String::new(),
            model: String::new(),
            script_path: None,
            request_timeout_seconds: 120.0,
            extra: Default::default(),
        }
    }
}

impl BackendConfig {
    /// Builds the configured backend. HTTP backends read the key from the
    /// environment.
    pub fn build(&self) -> Result<Box<dyn ChatBackend>, LlmError> {
        match self.kind {
            BackendKind::Http => {
                let cfg = HttpConfig {
                    endpoint: self.endpoint.clone(),
                    model: self.model.clone(),
                    api_key: std::env::var(API_KEY_ENV).ok(),
                    timeout: Duration::from_secs_f64(self.request_timeout_seconds.max(0.001)),
                    extra: self.extra.clone(),
                    ..HttpConfig::default()
                };
                Ok(Box::new(HttpBackend::new(cfg)?))
            }
            BackendKind::Mock => {
                let path = self
                    .script_path
                    .as_ref()
                    .ok_or_else(|| LlmError::BackendError("mock backend needs script_path".into()))?;
                Ok(Box::new(ScriptedBackend::from_path(path)?))
            }
        }
    }
}
