//! The plan, execute, review loop.
//!
//! One round is one subtask execution attempt plus its Mentor review. The
//! Planner drafts a plan, each pending subtask goes to an executing agent,
//! the Mentor compares before/after, and an adjustment request sends the
//! plan back to the Planner for revision. The episode succeeds when the last
//! subtask passes review and fails when the round budget is spent.

mod assign;
mod trace;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::{
    librarian_answer, mentor_review, planner_plan, planner_revise, video_analyst_summarize,
    viewer_act, AgentContext, AgentError, Grounder, LabelGrounder, OfflineRetriever, PromptSet,
    Retriever, Review, HISTORY_WINDOW,
};
use crate::backend::{Decoding, RoleBackends};
use crate::codex::{run_pipeline, CodexError, ToolLibrary};
use crate::env::Environment;
use crate::plan::{Feedback, Granularity, Plan, Subtask, SubtaskStatus, UserRequest};
use crate::protocol::{route, validate_message, AgentMessage, AgentRole, Body, KeyPolicy};

pub use assign::{assign_subtask, AssignError};
pub use trace::{Trace, TraceRecord};

/// Round cap per episode.
pub const DEFAULT_BUDGET: u32 = 30;
/// Attempts at one subtask before it is marked failed and the Planner is
/// told to replace it.
pub const MAX_SUBTASK_ATTEMPTS: u32 = 5;

/// Everything the agents share for one episode.
pub struct Team<'a> {
    pub backends: RoleBackends<'a>,
    pub prompts: PromptSet,
    pub policy: KeyPolicy,
    pub retriever: Box<dyn Retriever + 'a>,
    pub grounder: Box<dyn Grounder + 'a>,
    pub library: ToolLibrary,
    pub decoding: Decoding,
}

impl<'a> Team<'a> {
    pub fn new(backends: RoleBackends<'a>) -> Self {
        Team {
            backends,
            prompts: PromptSet::builtin(),
            policy: KeyPolicy::canonical(),
            retriever: Box::new(OfflineRetriever::default()),
            grounder: Box::new(LabelGrounder),
            library: ToolLibrary::new(),
            decoding: Decoding::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure(FailureReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Continue,
    Success,
    Failure,
}

/// Success when every subtask is done and the last review asked for no
/// adjustment; failure when the budget is spent; otherwise continue.
pub fn check_termination(plan: &Plan, round: u32, budget: u32, last: &Feedback) -> Termination {
    if !last.adjustment_needed && plan.all_done() {
        Termination::Success
    } else if round >= budget {
        Termination::Failure
    } else {
        Termination::Continue
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub rounds_used: u32,
    pub plan: Plan,
    pub final_state: Value,
    /// Last Librarian answer, else the last successful Programmer output.
    pub answer: Option<String>,
}

impl EpisodeResult {
    pub fn succeeded(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EpisodeError {
    #[error("budget must be at least 1")]
    InvalidBudget,
    #[error("planner failure: {0}")]
    PlannerFailure(String),
    #[error("environment fault: {0}")]
    EnvironmentFault(String),
    #[error(transparent)]
    Agent(AgentError),
}

impl From<AgentError> for EpisodeError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::PlannerFailure(d) => EpisodeError::PlannerFailure(d),
            other => EpisodeError::Agent(other),
        }
    }
}

/// Revises `plan` through the Planner; the done prefix is kept.
pub fn apply_feedback(
    request: &UserRequest,
    plan: &Plan,
    under_review: &Subtask,
    feedback: &Feedback,
    note: Option<&str>,
    team: &mut Team<'_>,
) -> Result<(Plan, AgentMessage), EpisodeError> {
    Ok(planner_revise(
        request,
        plan,
        under_review,
        feedback,
        note,
        &mut team.backends,
        &team.prompts,
        &team.policy,
        team.decoding,
    )?)
}

struct Session<'s, 'a> {
    team: &'s mut Team<'a>,
    trace: &'s mut Trace,
    request: UserRequest,
    inbox: BTreeMap<AgentRole, Body>,
    history: BTreeMap<AgentRole, VecDeque<AgentMessage>>,
    librarian_answer: Option<String>,
    program_output: Option<String>,
}

struct Executed {
    executor: AgentRole,
    index: usize,
    report: String,
}

impl Session<'_, '_> {
    fn post(&mut self, round: u32, msg: AgentMessage) -> Result<(), EpisodeError> {
        validate_message(&msg, &self.team.policy).map_err(|e| {
            EpisodeError::Agent(AgentError::Unparseable {
                role: msg.sender,
                detail: e.to_string(),
            })
        })?;
        for (role, body) in route(&msg, &self.team.policy) {
            self.inbox.entry(role).or_default().extend(body);
        }
        self.trace.push(TraceRecord::Message {
            round,
            message: msg.clone(),
        });
        let h = self.history.entry(msg.sender).or_default();
        h.push_back(msg);
        while h.len() > HISTORY_WINDOW {
            h.pop_front();
        }
        Ok(())
    }

    fn context(&self, role: AgentRole) -> AgentContext {
        let empty_inbox = Body::new();
        let empty_hist = VecDeque::new();
        AgentContext::new(
            role,
            self.request.clone(),
            &self.team.policy,
            self.inbox.get(&role).unwrap_or(&empty_inbox),
            self.history.get(&role).unwrap_or(&empty_hist),
        )
    }

    fn record_applied(&mut self, round: u32, subtask: &str, env: &mut dyn Environment) {
        for (action, report) in env.drain_applied() {
            self.trace.push(TraceRecord::Action {
                round,
                subtask: subtask.to_string(),
                action,
                report,
            });
        }
    }

    fn execute(
        &mut self,
        round: u32,
        role: AgentRole,
        plan: &mut Plan,
        idx: usize,
        env: &mut dyn Environment,
    ) -> Result<Executed, EpisodeError> {
        let st = plan.subtasks[idx].clone();
        let mut report = String::new();
        let mut index = idx;
        match role {
            AgentRole::Viewer => match env.screenshot() {
                None => report.push_str("no screen is available to the Viewer"),
                Some(shot) => {
                    let out = viewer_act(
                        &self.request,
                        &st,
                        &shot,
                        self.team.grounder.as_ref(),
                        &mut self.team.backends,
                        &self.team.prompts,
                        &self.team.policy,
                        self.team.decoding,
                    );
                    match out {
                        Ok(out) => {
                            if st.granularity == Granularity::Coarse {
                                plan.subtasks.splice(idx..=idx, out.refined.iter().cloned());
                                plan.dedup_ids();
                                self.trace.push(TraceRecord::Plan {
                                    round,
                                    plan: plan.clone(),
                                });
                            }
                            index = idx;
                            let id = plan.subtasks[index].id.clone();
                            self.post(round, out.message.with_subtask(id.clone()))?;
                            let step = env
                                .apply(&out.action)
                                .map_err(|e| EpisodeError::EnvironmentFault(e.to_string()))?;
                            self.record_applied(round, &id, env);
                            report = match step.fault {
                                Some(f) => format!("performed {}; it had no effect: {f}", out.action),
                                None if step.changed => format!("performed {}", out.action),
                                None => format!("performed {}; nothing changed", out.action),
                            };
                        }
                        Err(AgentError::Grounding(g)) => {
                            let obs = format!("grounding failed: {g}");
                            let mut body = Body::new();
                            body.insert("observation".into(), Value::String(obs.clone()));
                            self.post(round, AgentMessage::new(AgentRole::Viewer, round, body).with_subtask(st.id.clone()))?;
                            report = obs;
                        }
                        Err(AgentError::Unparseable { detail, .. }) => {
                            report = format!("viewer output unusable: {detail}");
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            },
            AgentRole::Programmer => {
                let ctx = self.context(AgentRole::Programmer);
                let context = format!("Request: {}\n{}", self.request.text, ctx.render());
                let team = &mut *self.team;
                let run = run_pipeline(
                    &st.description,
                    &context,
                    &mut team.library,
                    |c| env.run_code(c),
                    &mut team.backends,
                    &team.prompts,
                    team.decoding,
                );
                self.record_applied(round, &st.id, env);
                match run {
                    Ok(run) => {
                        for event in &run.events {
                            self.trace.push(TraceRecord::Codex {
                                round,
                                subtask: st.id.clone(),
                                event: event.clone(),
                            });
                        }
                        let exec_report = json!({
                            "stdout": run.outcome.stdout,
                            "stderr": run.outcome.stderr,
                            "exit_status": run.outcome.exit_status,
                            "fault": run.outcome.fault,
                            "judge": run.evaluation.judge,
                            "score": run.evaluation.score,
                            "refine_cycles": run.cycles,
                        });
                        let mut body = Body::new();
                        body.insert("code".into(), Value::String(run.code.source.clone()));
                        body.insert("execution_report".into(), exec_report.clone());
                        self.post(round, AgentMessage::new(AgentRole::Programmer, round, body).with_subtask(st.id.clone()))?;
                        if run.accomplished() {
                            self.program_output = Some(run.outcome.stdout.trim().to_string());
                        }
                        report = format!("ran {} code: {}", crate::codex::task_signature(&st.description), exec_report);
                    }
                    Err(CodexError::SandboxUnavailable(m)) => {
                        return Err(EpisodeError::EnvironmentFault(format!("sandbox unavailable: {m}")))
                    }
                    Err(CodexError::Agent(e @ AgentError::Backend(_))) => return Err(e.into()),
                    Err(e) => report = format!("programmer failed: {e}"),
                }
            }
            AgentRole::Librarian => {
                let query = format!("{}\n(Original request: {})", st.description, self.request.text);
                let team = &mut *self.team;
                match librarian_answer(
                    &query,
                    team.retriever.as_mut(),
                    &mut team.backends,
                    &team.prompts,
                    &team.policy,
                    team.decoding,
                ) {
                    Ok(a) => {
                        let answer = a.answer();
                        report = format!(
                            "answered {:?}{}",
                            answer,
                            if a.unsourced { " (unsourced)" } else { "" }
                        );
                        self.librarian_answer = Some(answer);
                        self.post(round, a.message.with_subtask(st.id.clone()))?;
                    }
                    Err(AgentError::Unparseable { detail, .. }) => {
                        report = format!("librarian output unusable: {detail}")
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            AgentRole::VideoAnalyst => match env.recording() {
                None => report.push_str("no recording is available"),
                Some(clip) => {
                    let team = &mut *self.team;
                    match video_analyst_summarize(
                        &clip,
                        &st.description,
                        &mut team.backends,
                        &team.prompts,
                        &team.policy,
                        team.decoding,
                    ) {
                        Ok((events, msg)) => {
                            report = format!("extracted {} events", events.len());
                            self.post(round, msg.with_subtask(st.id.clone()))?;
                        }
                        Err(AgentError::EmptyClip) => report.push_str("the recording is empty"),
                        Err(AgentError::Unparseable { detail, .. }) => {
                            report = format!("video analysis unusable: {detail}")
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            },
            AgentRole::Planner | AgentRole::Mentor => {
                report = format!("{role} does not execute subtasks");
            }
        }
        Ok(Executed {
            executor: role,
            index,
            report,
        })
    }
}

/// Runs one episode, appending every message, action, state snapshot and
/// review to `trace`.
pub fn run_episode(
    request: &UserRequest,
    team: &mut Team<'_>,
    env: &mut dyn Environment,
    budget: u32,
    trace: &mut Trace,
) -> Result<EpisodeResult, EpisodeError> {
    if budget == 0 {
        return Err(EpisodeError::InvalidBudget);
    }
    trace.push(TraceRecord::Start {
        request: request.text.clone(),
        env: env.label(),
        budget,
        state: env.snapshot(),
    });
    let mut s = Session {
        team,
        trace,
        request: request.clone(),
        inbox: BTreeMap::new(),
        history: BTreeMap::new(),
        librarian_answer: None,
        program_output: None,
    };

    let (mut plan, msg) = planner_plan(
        request,
        &mut s.team.backends,
        &s.team.prompts,
        &s.team.policy,
        s.team.decoding,
    )?;
    s.post(0, msg)?;
    s.trace.push(TraceRecord::Plan {
        round: 0,
        plan: plan.clone(),
    });

    let gui = env.screenshot().is_some();
    let mut attempts: BTreeMap<String, u32> = BTreeMap::new();
    let mut round = 0;
    let outcome = loop {
        let Some(idx) = plan.cursor() else {
            break Outcome::Success;
        };
        round += 1;
        let current = plan.subtasks[idx].clone();
        let before = env.screenshot();

        let (feedback, reviewed) = match assign_subtask(&current, gui) {
            Err(e) => {
                let fb = Feedback::adjust(format!("{e}"), None);
                (fb, current.clone())
            }
            Ok(role) => {
                let done = s.execute(round, role, &mut plan, idx, env)?;
                let reviewed = plan.subtasks[done.index].clone();
                s.trace.push(TraceRecord::State {
                    round,
                    state: env.snapshot(),
                });
                let after = env.screenshot();
                let review = Review {
                    subtask: &reviewed,
                    executor: done.executor,
                    report: &done.report,
                    before: before.as_ref(),
                    after: after.as_ref(),
                };
                let fb = match mentor_review(
                    request,
                    review,
                    &mut s.team.backends,
                    &s.team.prompts,
                    &s.team.policy,
                    s.team.decoding,
                ) {
                    Ok((fb, msg)) => {
                        s.post(round, msg.with_subtask(reviewed.id.clone()))?;
                        fb
                    }
                    Err(AgentError::Unparseable { detail, .. }) => {
                        Feedback::adjust(format!("review unusable: {detail}"), None)
                    }
                    Err(e) => return Err(e.into()),
                };
                (fb, reviewed)
            }
        };
        s.trace.push(TraceRecord::Feedback {
            round,
            subtask: reviewed.id.clone(),
            feedback: feedback.clone(),
        });
        if !feedback.adjustment_needed {
            if let Some(st) = plan.subtasks.iter_mut().find(|t| t.id == reviewed.id) {
                st.status = SubtaskStatus::Done;
            }
            attempts.remove(&reviewed.id);
        }
        match check_termination(&plan, round, budget, &feedback) {
            Termination::Success => break Outcome::Success,
            Termination::Failure => break Outcome::Failure(FailureReason::BudgetExhausted),
            Termination::Continue => {}
        }
        if feedback.adjustment_needed {
            let n = attempts.entry(reviewed.id.clone()).or_default();
            *n += 1;
            let mut note = None;
            if *n >= MAX_SUBTASK_ATTEMPTS {
                attempts.remove(&reviewed.id);
                if let Some(st) = plan.subtasks.iter_mut().find(|t| t.id == reviewed.id) {
                    st.status = SubtaskStatus::Failed;
                }
                note = Some(format!(
                    "Subtask {} has failed {MAX_SUBTASK_ATTEMPTS} times. Replace it with a different approach.",
                    reviewed.id
                ));
            }
            let (next, msg) = apply_feedback(request, &plan, &reviewed, &feedback, note.as_deref(), s.team)?;
            plan = next;
            s.post(round, msg)?;
            s.trace.push(TraceRecord::Plan {
                round,
                plan: plan.clone(),
            });
        }
    };

    let answer = s.librarian_answer.take().or(s.program_output.take());
    let final_state = env.snapshot();
    s.trace.push(TraceRecord::Result {
        outcome,
        rounds_used: round,
        plan_version: plan.version,
        answer: answer.clone(),
        final_state: final_state.clone(),
    });
    Ok(EpisodeResult {
        outcome,
        rounds_used: round,
        plan,
        final_state,
        answer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn termination_examples() {
        let mut plan = Plan::new(0, alloc::vec![Subtask::new("a", "x"), Subtask::new("b", "y")]);
        plan.subtasks[0].status = SubtaskStatus::Done;
        let ok = Feedback::ok("fine");
        assert_eq!(check_termination(&plan, 5, 30, &ok), Termination::Continue);
        assert_eq!(check_termination(&plan, 30, 30, &ok), Termination::Failure);
        plan.subtasks[1].status = SubtaskStatus::Done;
        assert_eq!(check_termination(&plan, 7, 30, &ok), Termination::Success);
        assert_eq!(check_termination(&plan, 30, 30, &ok), Termination::Success);
        let adj = Feedback::adjust("no", None);
        assert_eq!(check_termination(&plan, 7, 30, &adj), Termination::Continue);
    }

    #[test]
    fn outcome_serialization() {
        assert_eq!(serde_json::to_value(Outcome::Success).unwrap(), json!({"status": "success"}));
        assert_eq!(
            serde_json::to_value(Outcome::Failure(FailureReason::BudgetExhausted)).unwrap(),
            json!({"status": "failure", "reason": "budget_exhausted"})
        );
    }

    #[test]
    fn zero_budget_rejected() {
        let mut team = Team::new(RoleBackends::new());
        let mut env = crate::env::Headless::new(None);
        let mut trace = Trace::new();
        let r = run_episode(&UserRequest::new("x").unwrap(), &mut team, &mut env, 0, &mut trace);
        assert_eq!(r, Err(EpisodeError::InvalidBudget));
    }
}
