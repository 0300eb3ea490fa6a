use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{Map, Value};

use crate::action::{ActionKind, Target, UIAction};
use crate::backend::{AttachmentKind, CompletionBackend, CompletionRequest, Decoding};
use crate::plan::{Granularity, Subtask, UserRequest};
use crate::protocol::{value_text, AgentMessage, AgentRole, KeyPolicy};
use crate::simenv::{ground, GroundError, Grounding, Screenshot};

use super::{consult_message, AgentError, PromptSet};

/// Resolves a textual target description against a screenshot.
pub trait Grounder {
    fn ground(&self, shot: &Screenshot, description: &str) -> Result<Grounding, GroundError>;
}

/// Label and id matching over the rendered element list.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelGrounder;

impl Grounder for LabelGrounder {
    fn ground(&self, shot: &Screenshot, description: &str) -> Result<Grounding, GroundError> {
        ground(shot, description)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewerOutput {
    /// Atomic steps replacing the subtask; the action performs the first.
    pub refined: Vec<Subtask>,
    pub action: UIAction,
    pub grounding: Option<Grounding>,
    pub message: AgentMessage,
}

enum RawTarget {
    Description(String),
    Element(String),
    Point(i32, i32),
}

struct Proposal {
    kind: ActionKind,
    target: Option<RawTarget>,
    payload: Option<String>,
}

fn kind_from(s: &str) -> Option<ActionKind> {
    match s.trim().to_ascii_lowercase().as_str() {
        "click" | "tap" | "select" => Some(ActionKind::Click),
        "type" | "input" | "enter_text" => Some(ActionKind::Type),
        "press" | "key" | "hotkey" => Some(ActionKind::Press),
        "scroll" => Some(ActionKind::Scroll),
        "launch" | "open" => Some(ActionKind::Launch),
        _ => None,
    }
}

fn decode_proposal(v: &Value) -> Result<Proposal, String> {
    let obj = v.as_object().ok_or("`ui_action` is not an object")?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .and_then(kind_from)
        .ok_or("`ui_action.kind` missing or unknown")?;
    let target = match obj.get("target") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s.trim().is_empty() => None,
        Some(Value::String(s)) => Some(RawTarget::Description(s.clone())),
        Some(Value::Object(o)) => target_object(o)?,
        Some(other) => Some(RawTarget::Description(value_text(other))),
    };
    let payload = obj
        .get("payload")
        .filter(|p| !p.is_null())
        .map(value_text)
        .filter(|p| !p.is_empty());
    Ok(Proposal { kind, target, payload })
}

fn target_object(o: &Map<String, Value>) -> Result<Option<RawTarget>, String> {
    if let Some(id) = o.get("element").and_then(Value::as_str) {
        return Ok(Some(RawTarget::Element(id.to_string())));
    }
    match (o.get("x").and_then(Value::as_i64), o.get("y").and_then(Value::as_i64)) {
        (Some(x), Some(y)) => Ok(Some(RawTarget::Point(x as i32, y as i32))),
        _ => Err("`ui_action.target` object needs `element` or `x`/`y`".into()),
    }
}

fn refinement_items(v: Option<&Value>) -> Vec<String> {
    let Some(Value::Array(items)) = v else {
        return Vec::new();
    };
    items
        .iter()
        .filter_map(|i| match i {
            Value::Object(o) => o.get("description").map(value_text),
            other => Some(value_text(other)),
        })
        .filter(|s| !s.trim().is_empty())
        .collect()
}

/// Proposes one grounded action for the current subtask, refining it first
/// when it is coarse.
#[allow(clippy::too_many_arguments)]
pub fn viewer_act(
    request: &UserRequest,
    subtask: &Subtask,
    shot: &Screenshot,
    grounder: &dyn Grounder,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    policy: &KeyPolicy,
    decoding: Decoding,
) -> Result<ViewerOutput, AgentError> {
    if let Some(role) = subtask.assigned_role {
        if role != AgentRole::Viewer {
            return Err(AgentError::Precondition(format!(
                "subtask {} is assigned to {role}",
                subtask.id
            )));
        }
    }
    let granularity = match subtask.granularity {
        Granularity::Coarse => "coarse",
        Granularity::Atomic => "atomic",
    };
    let screen = shot.to_json();
    let prompt = prompts.render(
        "viewer",
        &[
            ("request", &request.text),
            ("subtask", &subtask.description),
            ("granularity", granularity),
            ("screen", &screen),
        ],
    );
    let mut req = CompletionRequest::new(AgentRole::Viewer, prompt).attach(AttachmentKind::Image, screen.clone());
    req.decoding = decoding;
    let (mut message, proposal) = consult_message(backend, &req, policy, |m| {
        let raw = m.get("ui_action").ok_or("missing `ui_action` key")?;
        let p = decode_proposal(raw)?;
        Ok((m, p))
    })?;

    let refined = match subtask.granularity {
        Granularity::Atomic => alloc::vec![subtask.clone()],
        Granularity::Coarse => {
            let mut steps = refinement_items(message.get("refinement"));
            if steps.is_empty() {
                steps.push(subtask.description.clone());
            }
            steps
                .into_iter()
                .enumerate()
                .map(|(i, d)| {
                    Subtask::new(format!("{}.{}", subtask.id, i + 1), d).for_role(AgentRole::Viewer)
                })
                .collect()
        }
    };

    let mut grounding = None;
    let target = match proposal.target {
        None => None,
        Some(RawTarget::Point(x, y)) => Some(Target::Coordinates { x, y }),
        Some(RawTarget::Element(id)) if shot.element(&id).is_some() => Some(Target::Element(id)),
        Some(RawTarget::Element(desc)) | Some(RawTarget::Description(desc)) => {
            if proposal.kind == ActionKind::Launch {
                None
            } else {
                let g = grounder.ground(shot, &desc)?;
                let id = g.element.clone();
                grounding = Some(g);
                Some(Target::Element(id))
            }
        }
    };
    let payload = match (proposal.kind, proposal.payload) {
        (ActionKind::Launch, None) => message
            .get("ui_action")
            .and_then(|u| u.get("target"))
            .map(value_text),
        (_, p) => p,
    };
    let action = UIAction::new(proposal.kind, target, payload).map_err(|e| AgentError::Unparseable {
        role: AgentRole::Viewer,
        detail: e.to_string(),
    })?;

    message.body.insert(
        "ui_action".into(),
        serde_json::to_value(&action).unwrap_or(Value::Null),
    );
    if subtask.granularity == Granularity::Coarse {
        let steps = refined.iter().map(|s| Value::String(s.description.clone())).collect();
        message.body.insert("refinement".into(), Value::Array(steps));
    } else {
        message.body.remove("refinement");
    }
    Ok(ViewerOutput {
        refined,
        action,
        grounding,
        message,
    })
}
