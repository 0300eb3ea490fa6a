use alloc::string::String;

use serde_json::Value;

use crate::backend::{AttachmentKind, CompletionBackend, CompletionRequest, Decoding};
use crate::plan::{Feedback, Subtask, UserRequest};
use crate::protocol::{AgentMessage, AgentRole, KeyPolicy};
use crate::simenv::Screenshot;

use super::{consult_message, AgentError, PromptSet};

/// Inputs the Mentor compares.
#[derive(Debug, Clone, Copy)]
pub struct Review<'a> {
    pub subtask: &'a Subtask,
    pub executor: AgentRole,
    /// What the executor did or reported.
    pub report: &'a str,
    pub before: Option<&'a Screenshot>,
    pub after: Option<&'a Screenshot>,
}

/// Reviews one executed subtask and decides whether the plan needs
/// adjusting. The message body is normalized to the decoded feedback.
pub fn mentor_review(
    request: &UserRequest,
    review: Review<'_>,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    policy: &KeyPolicy,
    decoding: Decoding,
) -> Result<(Feedback, AgentMessage), AgentError> {
    let none = String::from("(no screenshot)");
    let before = review.before.map(Screenshot::to_json).unwrap_or_else(|| none.clone());
    let after = review.after.map(Screenshot::to_json).unwrap_or(none);
    let prompt = prompts.render(
        "mentor",
        &[
            ("request", &request.text),
            ("subtask", &review.subtask.description),
            ("executor", review.executor.as_str()),
            ("report", review.report),
            ("before", &before),
            ("after", &after),
        ],
    );
    let mut req = CompletionRequest::new(AgentRole::Mentor, prompt);
    if review.before.is_some() {
        req = req.attach(AttachmentKind::Image, before);
    }
    if review.after.is_some() {
        req = req.attach(AttachmentKind::Image, after);
    }
    req.decoding = decoding;
    let mut message = consult_message(backend, &req, policy, |m| match m.get("adjustment_needed") {
        Some(Value::Bool(_)) | Some(Value::String(_)) => Ok(m),
        _ => Err(String::from("missing boolean `adjustment_needed`")),
    })?;
    let feedback = Feedback::from_body(&message.body);
    message.body = feedback.to_body();
    Ok((feedback, message))
}
