use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::action::UIAction;
use crate::codex::CodexEvent;
use crate::plan::{Feedback, Plan};
use crate::protocol::AgentMessage;
use crate::simenv::StepReport;

use super::Outcome;

/// One line of an episode trace. Round 0 is planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Start {
        request: String,
        env: String,
        budget: u32,
        state: Value,
    },
    Plan {
        round: u32,
        plan: Plan,
    },
    Message {
        round: u32,
        message: AgentMessage,
    },
    Action {
        round: u32,
        subtask: String,
        action: UIAction,
        report: StepReport,
    },
    Codex {
        round: u32,
        subtask: String,
        event: CodexEvent,
    },
    State {
        round: u32,
        state: Value,
    },
    Feedback {
        round: u32,
        subtask: String,
        feedback: Feedback,
    },
    Result {
        outcome: Outcome,
        rounds_used: u32,
        plan_version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        answer: Option<String>,
        final_state: Value,
    },
}

impl TraceRecord {
    pub fn round(&self) -> Option<u32> {
        match self {
            TraceRecord::Start { .. } | TraceRecord::Result { .. } => None,
            TraceRecord::Plan { round, .. }
            | TraceRecord::Message { round, .. }
            | TraceRecord::Action { round, .. }
            | TraceRecord::Codex { round, .. }
            | TraceRecord::State { round, .. }
            | TraceRecord::Feedback { round, .. } => Some(*round),
        }
    }
}

/// Append-only record of an episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// JSON Lines, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, serde_json::Error> {
        let mut records = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            records.push(serde_json::from_str(line)?);
        }
        Ok(Trace { records })
    }

    pub fn actions(&self) -> impl Iterator<Item = &UIAction> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Action { action, .. } => Some(action),
            _ => None,
        })
    }

    pub fn plan_versions(&self) -> impl Iterator<Item = u32> + '_ {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Plan { plan, .. } => Some(plan.version),
            _ => None,
        })
    }
}
