//! OpenAI-compatible chat-completions client.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use mmac_core::backend::{
    AttachmentKind, BackendError, CompletionBackend, CompletionRequest, CompletionResponse, Usage,
};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Set to anything but "", "0" or "false" to forbid network access.
pub const OFFLINE_ENV: &str = "MMAC_OFFLINE";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

static ATTEMPTS: AtomicUsize = AtomicUsize::new(0);

pub fn offline() -> bool {
    match std::env::var(OFFLINE_ENV) {
        Ok(v) => {
            let v = v.trim().to_ascii_lowercase();
            !(v.is_empty() || v == "0" || v == "false")
        }
        Err(_) => false,
    }
}

/// Connection attempts made by every remote backend in this process.
pub fn network_attempts() -> usize {
    ATTEMPTS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubles after that.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

pub struct RemoteBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: String,
    retry: RetryPolicy,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl RemoteBackend {
    pub fn new(model: impl Into<String>, endpoint: Option<String>, api_key: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        RemoteBackend {
            agent: ureq::Agent::new_with_config(config),
            endpoint: endpoint.unwrap_or_else(|| DEFAULT_ENDPOINT.to_string()),
            model: model.into(),
            api_key: api_key.into(),
            retry: RetryPolicy::default(),
        }
    }

    /// Reads the credential from the named environment variable.
    pub fn from_env(model: impl Into<String>, endpoint: Option<String>, key_env: &str) -> Result<Self> {
        match std::env::var(key_env) {
            Ok(k) if !k.trim().is_empty() => Ok(RemoteBackend::new(model, endpoint, k)),
            _ => Err(Error::MissingCredential(key_env.to_string())),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn request_body(&self, req: &CompletionRequest) -> Value {
        let mut parts = vec![json!({"type": "text", "text": req.prompt})];
        for a in &req.attachments {
            let tag = match a.kind {
                AttachmentKind::Image => "screenshot",
                AttachmentKind::Video => "video",
                AttachmentKind::File => "file",
            };
            parts.push(json!({"type": "text", "text": format!("[{tag}]\n{}", a.content)}));
        }
        json!({
            "model": self.model,
            "temperature": req.decoding.temperature,
            "max_tokens": req.decoding.max_tokens,
            "messages": [{"role": "user", "content": parts}],
        })
    }

    fn send_once(&self, body: &str) -> std::result::Result<(u16, String), String> {
        ATTEMPTS.fetch_add(1, Ordering::SeqCst);
        let resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(body);
        match resp {
            Ok(mut r) => {
                let status = r.status().as_u16();
                let text = r.body_mut().read_to_string().map_err(|e| e.to_string())?;
                Ok((status, text))
            }
            Err(e) => Err(e.to_string()),
        }
    }
}

fn parse_reply(text: &str) -> std::result::Result<CompletionResponse, BackendError> {
    let v: Value = serde_json::from_str(text).map_err(|e| BackendError::RemoteError {
        status: 200,
        body: format!("unreadable reply: {e}"),
    })?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let usage = Usage {
        prompt_tokens: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0) as u32,
        completion_tokens: v.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0) as u32,
    };
    let mut out = CompletionResponse::new(content, "remote");
    out.usage = usage;
    if out.text.is_empty() {
        let why = v
            .pointer("/error/message")
            .and_then(Value::as_str)
            .or_else(|| v.pointer("/choices/0/finish_reason").and_then(Value::as_str))
            .unwrap_or("empty completion");
        out.provider_error = Some(why.to_string());
    }
    Ok(out)
}

impl CompletionBackend for RemoteBackend {
    fn complete(&mut self, req: &CompletionRequest) -> std::result::Result<CompletionResponse, BackendError> {
        if offline() {
            return Err(BackendError::Offline);
        }
        let body = self.request_body(req).to_string();
        let mut delay = self.retry.base_delay;
        let mut last = BackendError::RemoteError {
            status: 0,
            body: "no attempt made".into(),
        };
        for attempt in 0..self.retry.attempts.max(1) {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            match self.send_once(&body) {
                Ok((200..=299, text)) => return parse_reply(&text),
                Ok((status, text)) if status == 429 || status >= 500 => {
                    last = BackendError::RemoteError { status, body: text };
                }
                Ok((status, text)) => return Err(BackendError::RemoteError { status, body: text }),
                Err(transport) => {
                    last = BackendError::RemoteError {
                        status: 0,
                        body: transport,
                    };
                }
            }
        }
        Err(last)
    }
}
