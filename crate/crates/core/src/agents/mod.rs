//! The six role behaviors. Each turns its routed context plus environment
//! artifacts into a policy-valid message through a completion backend.

mod librarian;
mod mentor;
mod planner;
mod prompts;
mod video;
mod viewer;

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde_json::{Map, Value};

use crate::backend::{BackendError, CompletionBackend, CompletionRequest};
use crate::plan::{Subtask, UserRequest};
use crate::protocol::{
    extract_object, parse_model_output, AgentMessage, AgentRole, Body, KeyPolicy, ProtocolError,
};
use crate::simenv::GroundError;

pub use crate::action::{ActionError, ActionKind, Target, UIAction};
pub use librarian::{librarian_answer, Document, LibrarianAnswer, OfflineRetriever, Retriever, RetrieverError};
pub use mentor::{mentor_review, Review};
pub use planner::{planner_plan, planner_revise};
pub use prompts::{PromptSet, PROMPT_NAMES};
pub use video::video_analyst_summarize;
pub use viewer::{viewer_act, Grounder, LabelGrounder, ViewerOutput};

/// Messages of its own an agent sees again in its prompt.
pub const HISTORY_WINDOW: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{role} output unusable after repair: {detail}")]
    Unparseable { role: AgentRole, detail: String },
    #[error("planner failure: {0}")]
    PlannerFailure(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Grounding(#[from] GroundError),
    #[error("video clip has no frames")]
    EmptyClip,
}

/// What an agent is allowed to see for one call.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentContext {
    pub role: AgentRole,
    pub request: UserRequest,
    pub routed_keys: Body,
    pub history_window: Vec<AgentMessage>,
    pub current_subtask: Option<Subtask>,
}

impl AgentContext {
    /// Builds a context, dropping any inbox key the role may not receive and
    /// keeping only the last [`HISTORY_WINDOW`] own messages.
    pub fn new(
        role: AgentRole,
        request: UserRequest,
        policy: &KeyPolicy,
        inbox: &Body,
        history: &VecDeque<AgentMessage>,
    ) -> Self {
        let allowed = policy.receivable_by(role);
        let routed_keys = inbox
            .iter()
            .filter(|(k, _)| allowed.contains(k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let skip = history.len().saturating_sub(HISTORY_WINDOW);
        AgentContext {
            role,
            request,
            routed_keys,
            history_window: history.iter().skip(skip).cloned().collect(),
            current_subtask: None,
        }
    }

    pub fn bare(role: AgentRole, request: UserRequest) -> Self {
        AgentContext {
            role,
            request,
            routed_keys: Body::new(),
            history_window: Vec::new(),
            current_subtask: None,
        }
    }

    /// Routed keys and recent own messages, as prompt text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.routed_keys.is_empty() {
            out.push_str("(none)\n");
        } else {
            for (k, v) in &self.routed_keys {
                out.push_str(&format!("{k}: {}\n", crate::protocol::value_text(v)));
            }
        }
        if !self.history_window.is_empty() {
            out.push_str("Your recent messages:\n");
            for m in &self.history_window {
                let body = serde_json::to_string(&m.body).unwrap_or_default();
                out.push_str(&format!("- round {}: {body}\n", m.round));
            }
        }
        out
    }
}

fn repair_request(req: &CompletionRequest, error: &str) -> CompletionRequest {
    let mut r = req.clone();
    r.prompt = format!(
        "{}\n\nYour previous reply could not be used ({error}). Reply again with a single JSON object and nothing else.",
        req.prompt
    );
    r
}

/// Calls the backend and decodes the reply, allowing one repair round-trip
/// with the decode error appended to the prompt.
pub(crate) fn consult<T>(
    backend: &mut dyn CompletionBackend,
    req: &CompletionRequest,
    decode: impl Fn(&str) -> Result<T, String>,
) -> Result<T, AgentError> {
    let first = backend.complete(req)?;
    let err = match decode(&first.text) {
        Ok(v) => return Ok(v),
        Err(e) => e,
    };
    let second = match backend.complete(&repair_request(req, &err)) {
        Ok(r) => r,
        Err(be) => {
            return Err(AgentError::Unparseable {
                role: req.role,
                detail: format!("{err}; repair call failed: {be}"),
            })
        }
    };
    decode(&second.text).map_err(|detail| AgentError::Unparseable {
        role: req.role,
        detail,
    })
}

/// Decodes a policy-valid message, then applies `shape` for key-specific
/// checks.
pub(crate) fn consult_message<T>(
    backend: &mut dyn CompletionBackend,
    req: &CompletionRequest,
    policy: &KeyPolicy,
    shape: impl Fn(AgentMessage) -> Result<T, String>,
) -> Result<T, AgentError> {
    let role = req.role;
    consult(backend, req, |raw| {
        let msg = parse_model_output(raw, role, policy, |_| None).map_err(|e: ProtocolError| alloc::string::ToString::to_string(&e))?;
        shape(msg)
    })
}

/// Decodes any JSON object (internal pipeline calls that are not routed).
pub(crate) fn consult_object<T>(
    backend: &mut dyn CompletionBackend,
    req: &CompletionRequest,
    shape: impl Fn(Map<String, Value>) -> Result<T, String>,
) -> Result<T, AgentError> {
    consult(backend, req, |raw| {
        let obj = extract_object(raw).ok_or_else(|| String::from("no JSON object found"))?;
        shape(obj)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Script, ScriptedBackend};
    use serde_json::json;

    #[test]
    fn context_filters_unreceivable_keys() {
        let policy = KeyPolicy::canonical();
        let inbox: Body = [
            ("observation".into(), json!("secret")),
            ("plan".into(), json!([])),
        ]
        .into_iter()
        .collect();
        let ctx = AgentContext::new(
            AgentRole::Viewer,
            UserRequest::new("x").unwrap(),
            &policy,
            &inbox,
            &VecDeque::new(),
        );
        assert!(ctx.routed_keys.contains_key("plan"));
        assert!(!ctx.routed_keys.contains_key("observation"));
    }

    #[test]
    fn history_is_bounded() {
        let policy = KeyPolicy::canonical();
        let hist: VecDeque<AgentMessage> = (0..20)
            .map(|i| AgentMessage::new(AgentRole::Viewer, i, [("observation".into(), json!(i))].into_iter().collect()))
            .collect();
        let ctx = AgentContext::new(AgentRole::Viewer, UserRequest::new("x").unwrap(), &policy, &Body::new(), &hist);
        assert_eq!(ctx.history_window.len(), HISTORY_WINDOW);
        assert_eq!(ctx.history_window[0].round, 12);
    }

    #[test]
    fn consult_repairs_once() {
        let mut b = ScriptedBackend::new(
            Script::new()
                .with(AgentRole::Librarian, "no idea")
                .with(AgentRole::Librarian, json!({"answer": "4"})),
        );
        let req = CompletionRequest::new(AgentRole::Librarian, "2+2?");
        let policy = KeyPolicy::canonical();
        let msg = consult_message(&mut b, &req, &policy, Ok).unwrap();
        assert_eq!(msg.text("answer").as_deref(), Some("4"));
        assert_eq!(b.calls(AgentRole::Librarian), 2);
    }

    #[test]
    fn consult_gives_up_after_repair() {
        let mut b = ScriptedBackend::new(Script::new().with(AgentRole::Librarian, "no").repeating());
        let req = CompletionRequest::new(AgentRole::Librarian, "?");
        let r = consult_object(&mut b, &req, Ok);
        assert!(matches!(r, Err(AgentError::Unparseable { .. })));
        assert_eq!(b.calls(AgentRole::Librarian), 2);
    }
}
