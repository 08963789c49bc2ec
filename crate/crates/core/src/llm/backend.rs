use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError, PromptKind};

pub const API_KEY_ENV: &str = "PVSQL_API_KEY";

/// Rough token count for backends that report no usage: chars / 4.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL, or the full `/chat/completions` URL.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub extra: serde_json::Map<String, Value>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key: None,
            timeout: Duration::from_secs(120),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            extra: Default::default(),
        }
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpBackend {
    config: HttpConfig,
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        if config.endpoint.is_empty() || config.model.is_empty() {
            return Err(LlmError::BackendError("http backend needs an endpoint and a model".into()));
        }
        let base = config.endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") { base.to_string() } else { format!("{base}/chat/completions") };
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::BackendError(e.to_string()))?;
        Ok(Self { config, url, client })
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.text}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let obj = body.as_object_mut().unwrap();
        for (k, v) in &self.config.extra {
            obj.insert(k.clone(), v.clone());
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<Value, Attempt> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(Attempt::Fatal(LlmError::AuthError(format!("HTTP {status}"))));
        }
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Attempt::Fatal(LlmError::BackendError(format!("HTTP {status}: {text}"))));
        }
        resp.json::<Value>().map_err(|e| Attempt::Retry(format!("bad response body: {e}")))
    }
}

enum Attempt {
    Retry(String),
    Fatal(LlmError),
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let body = self.body(request);
        let start = Instant::now();
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let wait = self.config.backoff * 2u32.pow(attempt - 1);
                warn!(attempt, ?wait, error = %last, "retrying chat request");
                std::thread::sleep(wait);
            }
            match self.attempt(&body) {
                Ok(v) => {
                    let text = v["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| LlmError::BackendError("response lacks choices[0].message.content".into()))?
                        .to_string();
                    let usage = (v["usage"]["prompt_tokens"].as_u64(), v["usage"]["completion_tokens"].as_u64());
                    let (tokens_in, tokens_out, estimated) = match usage {
                        (Some(i), Some(o)) => (i, o, false),
                        _ => (estimate_tokens(&request.text), estimate_tokens(&text), true),
                    };
                    let latency_seconds = start.elapsed().as_secs_f64();
                    debug!(kind = ?request.kind, tokens_in, tokens_out, latency_seconds, "chat completion");
                    return Ok(ChatResponse { text, tokens_in, tokens_out, latency_seconds, estimated });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(LlmError::BackendError(format!("gave up after {} retries: {last}", self.config.max_retries)))
    }
}

/// One scripted reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub expect_kind: PromptKind,
    #[serde(default)]
    pub response_text: String,
    #[serde(default)]
    pub tokens_in: u64,
    #[serde(default)]
    pub tokens_out: u64,
    /// Simulated failure: "auth" gives an auth error, anything else a
    /// backend error with this text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ScriptEntry {
    pub fn new(kind: PromptKind, text: impl Into<String>, tokens_in: u64, tokens_out: u64) -> Self {
        Self { expect_kind: kind, response_text: text.into(), tokens_in, tokens_out, error: None }
    }

    pub fn failing(kind: PromptKind, error: impl Into<String>) -> Self {
        Self { expect_kind: kind, response_text: String::new(), tokens_in: 0, tokens_out: 0, error: Some(error.into()) }
    }
}

/// Replays a fixed list of replies in order.
///
/// A request whose kind differs from the next entry's `expect_kind` is a
/// broken scenario and panics.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    state: Mutex<ScriptState>,
}

#[derive(Debug, Default)]
struct ScriptState {
    queue: VecDeque<ScriptEntry>,
    log: Vec<ChatRequest>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { state: Mutex::new(ScriptState { queue: entries.into(), log: Vec::new() }) }
    }

    pub fn from_path(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::BackendError(format!("reading script {}: {e}", path.display())))?;
        let entries: Vec<ScriptEntry> = serde_json::from_str(&text)
            .map_err(|e| LlmError::BackendError(format!("parsing script {}: {e}", path.display())))?;
        Ok(Self::new(entries))
    }

    pub fn remaining(&self) -> usize {
        self.state.lock().unwrap().queue.len()
    }

    /// Every request received so far.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.state.lock().unwrap().log.clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut state = self.state.lock().unwrap();
        state.log.push(request.clone());
        let Some(entry) = state.queue.pop_front() else {
            return Err(LlmError::BackendError("mock script exhausted".into()));
        };
        assert_eq!(
            entry.expect_kind, request.kind,
            "mock script expected a {:?} request but received {:?}",
            entry.expect_kind, request.kind
        );
        match entry.error.as_deref() {
            Some("auth") => Err(LlmError::AuthError("scripted".into())),
            Some(msg) => Err(LlmError::BackendError(msg.to_string())),
            None => Ok(ChatResponse {
                text: entry.response_text,
                tokens_in: entry.tokens_in,
                tokens_out: entry.tokens_out,
                latency_seconds: 0.0,
                estimated: false,
            }),
        }
    }
}

/// Backend defined by a closure; handy for adversarial test doubles.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, LlmError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (self.0)(request)
    }
}
