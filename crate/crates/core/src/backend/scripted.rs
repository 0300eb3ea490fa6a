use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BackendError, CompletionBackend, CompletionRequest, CompletionResponse, Usage};
use crate::protocol::AgentRole;

/// Canned responses. Entries may be strings (returned verbatim) or JSON
/// values (returned as compact JSON text).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub responses: BTreeMap<AgentRole, Vec<Value>>,
    #[serde(default)]
    pub by_digest: BTreeMap<String, Value>,
    /// Keep returning a role's last response once its list runs out.
    #[serde(default)]
    pub repeat_last: bool,
}

impl Script {
    pub fn new() -> Self {
        Script::default()
    }

    pub fn push(&mut self, role: AgentRole, response: impl Into<Value>) -> &mut Self {
        self.responses.entry(role).or_default().push(response.into());
        self
    }

    pub fn with(mut self, role: AgentRole, response: impl Into<Value>) -> Self {
        self.push(role, response);
        self
    }

    pub fn repeating(mut self) -> Self {
        self.repeat_last = true;
        self
    }
}

fn as_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Deterministic backend: answers from a digest table first, then the
/// role's next canned response.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: Script,
    counters: BTreeMap<AgentRole, usize>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        ScriptedBackend {
            script,
            counters: BTreeMap::new(),
        }
    }

    pub fn calls(&self, role: AgentRole) -> usize {
        self.counters.get(&role).copied().unwrap_or(0)
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        if !self.script.by_digest.is_empty() {
            if let Some(v) = self.script.by_digest.get(&req.digest()) {
                return Ok(CompletionResponse::new(as_text(v), "scripted"));
            }
        }
        let counter = self.counters.entry(req.role).or_default();
        let call = *counter;
        *counter += 1;
        let list = self.script.responses.get(&req.role);
        let v = match list {
            Some(list) if call < list.len() => &list[call],
            Some(list) if self.script.repeat_last && !list.is_empty() => &list[list.len() - 1],
            _ => {
                return Err(BackendError::ScriptExhausted {
                    role: req.role,
                    call: call + 1,
                })
            }
        };
        Ok(CompletionResponse::new(as_text(v), "scripted"))
    }
}

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub digest: String,
    pub role: AgentRole,
    pub response_text: String,
    #[serde(default)]
    pub usage: Usage,
}

/// Serves recorded responses by request digest. Repeated identical requests
/// get their recordings in the order they were stored.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    entries: BTreeMap<String, VecDeque<CassetteEntry>>,
}

impl ReplayBackend {
    pub fn new(entries: impl IntoIterator<Item = CassetteEntry>) -> Self {
        let mut map: BTreeMap<String, VecDeque<CassetteEntry>> = BTreeMap::new();
        for e in entries {
            map.entry(e.digest.clone()).or_default().push_back(e);
        }
        ReplayBackend { entries: map }
    }

    pub fn remaining(&self) -> usize {
        self.entries.values().map(VecDeque::len).sum()
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let digest = req.digest();
        match self.entries.get_mut(&digest).and_then(VecDeque::pop_front) {
            Some(e) => Ok(CompletionResponse {
                text: e.response_text,
                usage: e.usage,
                provider_tag: String::from("replay"),
                provider_error: None,
            }),
            None => Err(BackendError::CassetteMiss { digest }),
        }
    }
}
