use alloc::string::String;
use alloc::vec::Vec;

use crate::plan::{Subtask, SubtaskStatus};
use crate::protocol::AgentRole;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssignError {
    #[error("subtask `{0}` is not pending")]
    NotPending(String),
    #[error("no agent can take subtask `{id}`: {reason}")]
    UnassignableSubtask { id: String, reason: String },
}

/// Keyword fallback, checked in order.
const KEYWORDS: &[(&[&str], AgentRole)] = &[
    (&["video", "recording", "clip", "footage"], AgentRole::VideoAnalyst),
    (
        &["shell", "script", "bash", "command", "python", "code", "terminal"],
        AgentRole::Programmer,
    ),
    (
        &["click", "type", "press", "screenshot", "scroll", "tap", "select"],
        AgentRole::Viewer,
    ),
    (&["lookup", "look up", "question", "search the web"], AgentRole::Librarian),
];

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn mentions(ws: &[String], phrase: &str) -> bool {
    let p: Vec<&str> = phrase.split(' ').collect();
    ws.windows(p.len()).any(|w| w.iter().zip(&p).all(|(a, b)| a == b))
}

/// Picks the executing agent. The Planner's choice wins when it names an
/// executing role; otherwise the keyword table applies, and GUI episodes fall
/// back to the Viewer.
pub fn assign_subtask(s: &Subtask, gui: bool) -> Result<AgentRole, AssignError> {
    if s.status != SubtaskStatus::Pending {
        return Err(AssignError::NotPending(s.id.clone()));
    }
    match s.assigned_role {
        Some(AgentRole::Planner | AgentRole::Mentor) | None => {}
        Some(role) => return Ok(role),
    }
    if let Some(hint) = &s.role_hint {
        return Err(AssignError::UnassignableSubtask {
            id: s.id.clone(),
            reason: alloc::format!("unknown role `{hint}`"),
        });
    }
    let ws = words(&s.description);
    for (phrases, role) in KEYWORDS {
        if phrases.iter().any(|p| mentions(&ws, p)) {
            return Ok(*role);
        }
    }
    if gui {
        Ok(AgentRole::Viewer)
    } else {
        Err(AssignError::UnassignableSubtask {
            id: s.id.clone(),
            reason: String::from("no keyword matched and there is no screen"),
        })
    }
}
