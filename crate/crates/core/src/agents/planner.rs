use alloc::string::{String, ToString};

use crate::backend::{CompletionBackend, CompletionRequest, Decoding};
use crate::plan::{Feedback, Plan, Subtask, UserRequest};
use crate::protocol::{AgentMessage, AgentRole, KeyPolicy};

use super::{consult_message, AgentError, PromptSet};

fn decode_plan(msg: AgentMessage, version: u32) -> Result<(Plan, AgentMessage), String> {
    let value = msg.get("plan").ok_or_else(|| String::from("missing `plan` key"))?;
    let plan = Plan::from_value(version, value).map_err(|e| e.to_string())?;
    Ok((plan, msg))
}

fn into_planner_failure(e: AgentError) -> AgentError {
    match e {
        AgentError::Unparseable { detail, .. } => AgentError::PlannerFailure(detail),
        other => other,
    }
}

/// Decomposes the request into plan version 0.
pub fn planner_plan(
    request: &UserRequest,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    policy: &KeyPolicy,
    decoding: Decoding,
) -> Result<(Plan, AgentMessage), AgentError> {
    let prompt = prompts.render("planner", &[("request", &request.text)]);
    let mut req = CompletionRequest::new(AgentRole::Planner, prompt);
    req.decoding = decoding;
    consult_message(backend, &req, policy, |m| decode_plan(m, 0)).map_err(into_planner_failure)
}

/// Revises `plan` after an adjustment request. The observation reaches the
/// Planner verbatim; completed subtasks are preserved.
#[allow(clippy::too_many_arguments)]
pub fn planner_revise(
    request: &UserRequest,
    plan: &Plan,
    under_review: &Subtask,
    feedback: &Feedback,
    note: Option<&str>,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    policy: &KeyPolicy,
    decoding: Decoding,
) -> Result<(Plan, AgentMessage), AgentError> {
    if !feedback.adjustment_needed {
        return Err(AgentError::Precondition(
            "revision requested without adjustment_needed".into(),
        ));
    }
    let version = plan.version.to_string();
    let plan_text = serde_json::to_string(&plan.subtasks).unwrap_or_default();
    let prompt = prompts.render(
        "planner_revise",
        &[
            ("request", &request.text),
            ("version", &version),
            ("plan", &plan_text),
            ("subtask", &under_review.description),
            ("observation", &feedback.observation),
            ("suggestion", feedback.suggested_revision.as_deref().unwrap_or("(none)")),
            ("note", note.unwrap_or("")),
        ],
    );
    let mut req = CompletionRequest::new(AgentRole::Planner, prompt);
    req.decoding = decoding;
    let (revised, msg) = consult_message(backend, &req, policy, |m| decode_plan(m, 0))
        .map_err(into_planner_failure)?;
    Ok((plan.revise_with(revised.subtasks), msg))
}
