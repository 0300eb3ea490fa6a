//! Completion providers.
//!
//! Every model call in the engine goes through [`CompletionBackend`]. The core
//! ships the deterministic providers (scripted and cassette replay); remote
//! providers live in the std companion crate.

mod binding;
mod scripted;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::protocol::AgentRole;

pub use binding::{
    bind_roles, BackendConfig, BackendKind, ConfigError, DecodingDefaults, ResolvedBinding,
    RoleBinding, DEFAULT_TEXT_MODEL, DEFAULT_VIDEO_MODEL, DEFAULT_VISION_MODEL,
};
pub use scripted::{CassetteEntry, ReplayBackend, Script, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachmentKind {
    Image,
    Video,
    File,
}

/// Attachments carry structured content (a serialized screenshot, a clip, a
/// file body), never pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub kind: AttachmentKind,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f32,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub role: AgentRole,
    pub prompt: String,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    #[serde(default)]
    pub decoding: Decoding,
}

impl CompletionRequest {
    pub fn new(role: AgentRole, prompt: impl Into<String>) -> Self {
        CompletionRequest {
            role,
            prompt: prompt.into(),
            attachments: Vec::new(),
            decoding: Decoding::default(),
        }
    }

    pub fn attach(mut self, kind: AttachmentKind, content: impl Into<String>) -> Self {
        self.attachments.push(Attachment {
            kind,
            content: content.into(),
        });
        self
    }

    /// Hash of role, prompt and attachment hashes. Decoding parameters are
    /// excluded so replays survive temperature changes.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.role.as_str().as_bytes());
        h.update([0u8]);
        h.update(self.prompt.as_bytes());
        for a in &self.attachments {
            h.update([0u8]);
            h.update(match a.kind {
                AttachmentKind::Image => b"image".as_slice(),
                AttachmentKind::Video => b"video".as_slice(),
                AttachmentKind::File => b"file".as_slice(),
            });
            h.update([0u8]);
            h.update(Sha256::digest(a.content.as_bytes()));
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
    pub provider_tag: String,
    /// Set when the provider answered but reported a problem; the only case
    /// where `text` may be empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_error: Option<String>,
}

impl CompletionResponse {
    pub fn new(text: impl Into<String>, provider_tag: impl Into<String>) -> Self {
        CompletionResponse {
            text: text.into(),
            usage: Usage::default(),
            provider_tag: provider_tag.into(),
            provider_error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("script exhausted for {role} at call {call}")]
    ScriptExhausted { role: AgentRole, call: usize },
    #[error("no recorded response for digest {digest}")]
    CassetteMiss { digest: String },
    #[error("remote provider error {status}: {body}")]
    RemoteError { status: u16, body: String },
    #[error("network access is disabled")]
    Offline,
    #[error("no backend bound for {0}")]
    Unbound(AgentRole),
}

/// A source of completions. Implementations own any per-session state
/// (call counters, cassettes), so one instance belongs to one episode.
pub trait CompletionBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for alloc::boxed::Box<B> {
    fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(req)
    }
}

/// One backend per role for an episode.
#[derive(Default)]
pub struct RoleBackends<'a> {
    map: BTreeMap<AgentRole, alloc::boxed::Box<dyn CompletionBackend + 'a>>,
    calls: BTreeMap<AgentRole, usize>,
}

impl core::fmt::Debug for RoleBackends<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RoleBackends")
            .field("bound", &self.map.keys().collect::<Vec<_>>())
            .field("calls", &self.calls)
            .finish()
    }
}

impl<'a> RoleBackends<'a> {
    pub fn new() -> Self {
        RoleBackends {
            map: BTreeMap::new(),
            calls: BTreeMap::new(),
        }
    }

    pub fn bind(&mut self, role: AgentRole, backend: impl CompletionBackend + 'a) -> &mut Self {
        self.map.insert(role, alloc::boxed::Box::new(backend));
        self
    }

    pub fn with(mut self, role: AgentRole, backend: impl CompletionBackend + 'a) -> Self {
        self.bind(role, backend);
        self
    }

    pub fn is_bound(&self, role: AgentRole) -> bool {
        self.map.contains_key(&role)
    }

    pub fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        *self.calls.entry(req.role).or_default() += 1;
        match self.map.get_mut(&req.role) {
            Some(b) => b.complete(req),
            None => Err(BackendError::Unbound(req.role)),
        }
    }

    /// Backend calls made so far, per role.
    pub fn call_counts(&self) -> &BTreeMap<AgentRole, usize> {
        &self.calls
    }

    pub fn total_calls(&self) -> usize {
        self.calls.values().sum()
    }
}

impl CompletionBackend for RoleBackends<'_> {
    fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        RoleBackends::complete(self, req)
    }
}
