//! Requests, plans, subtasks and Mentor feedback.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::protocol::{value_text, AgentRole};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRequest {
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<String>,
}

impl UserRequest {
    /// Returns `None` for blank text.
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            None
        } else {
            Some(UserRequest {
                text,
                attachments: Vec::new(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Coarse,
    Atomic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubtaskStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    pub id: String,
    pub description: String,
    pub granularity: Granularity,
    /// Role chosen by the Planner, when it named a known one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigned_role: Option<AgentRole>,
    /// Raw role token when the Planner named a role that does not exist.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_hint: Option<String>,
    pub status: SubtaskStatus,
}

impl Subtask {
    pub fn new(id: impl Into<String>, description: impl Into<String>) -> Self {
        Subtask {
            id: id.into(),
            description: description.into(),
            granularity: Granularity::Atomic,
            assigned_role: None,
            role_hint: None,
            status: SubtaskStatus::Pending,
        }
    }

    pub fn coarse(mut self) -> Self {
        self.granularity = Granularity::Coarse;
        self
    }

    pub fn for_role(mut self, role: AgentRole) -> Self {
        self.assigned_role = Some(role);
        self
    }

    pub fn is_done(&self) -> bool {
        self.status == SubtaskStatus::Done
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("plan key missing or not a list")]
    NotAList,
    #[error("plan has no subtasks")]
    Empty,
    #[error("subtask {index} has no description")]
    MissingDescription { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub version: u32,
    pub subtasks: Vec<Subtask>,
}

impl Plan {
    pub fn new(version: u32, subtasks: Vec<Subtask>) -> Self {
        let mut plan = Plan { version, subtasks };
        plan.dedup_ids();
        plan
    }

    /// Decodes the Planner's `plan` value. Entries may be objects
    /// (`description`, optional `id`, `granularity`, `role`) or bare strings.
    pub fn from_value(version: u32, value: &Value) -> Result<Plan, PlanError> {
        let items = value.as_array().ok_or(PlanError::NotAList)?;
        let mut subtasks = Vec::with_capacity(items.len());
        for (index, item) in items.iter().enumerate() {
            let fallback_id = format!("s{}", index + 1);
            let subtask = match item {
                Value::String(s) if !s.trim().is_empty() => Subtask::new(fallback_id, s.trim()),
                Value::Object(obj) => {
                    let description = obj
                        .get("description")
                        .or_else(|| obj.get("task"))
                        .map(value_text)
                        .filter(|d| !d.trim().is_empty())
                        .ok_or(PlanError::MissingDescription { index })?;
                    let id = obj
                        .get("id")
                        .map(value_text)
                        .filter(|s| !s.is_empty())
                        .unwrap_or(fallback_id);
                    let mut st = Subtask::new(id, description.trim());
                    if let Some(g) = obj.get("granularity").and_then(Value::as_str) {
                        if g.eq_ignore_ascii_case("coarse") {
                            st.granularity = Granularity::Coarse;
                        }
                    }
                    if let Some(r) = obj.get("role").or_else(|| obj.get("agent")) {
                        let token = value_text(r);
                        match token.parse::<AgentRole>() {
                            Ok(role) => st.assigned_role = Some(role),
                            Err(_) if token.trim().is_empty() => {}
                            Err(_) => st.role_hint = Some(token),
                        }
                    }
                    st
                }
                _ => return Err(PlanError::MissingDescription { index }),
            };
            subtasks.push(subtask);
        }
        if subtasks.is_empty() {
            return Err(PlanError::Empty);
        }
        Ok(Plan::new(version, subtasks))
    }

    /// Index of the first subtask that is not done.
    pub fn cursor(&self) -> Option<usize> {
        self.subtasks.iter().position(|s| !s.is_done())
    }

    pub fn done_prefix(&self) -> &[Subtask] {
        let end = self.cursor().unwrap_or(self.subtasks.len());
        &self.subtasks[..end]
    }

    pub fn all_done(&self) -> bool {
        !self.subtasks.is_empty() && self.subtasks.iter().all(Subtask::is_done)
    }

    pub fn find(&self, id: &str) -> Option<&Subtask> {
        self.subtasks.iter().find(|s| s.id == id)
    }

    /// Renames repeated ids so they stay unique within the plan.
    pub(crate) fn dedup_ids(&mut self) {
        let mut seen = BTreeSet::new();
        for st in &mut self.subtasks {
            if !seen.insert(st.id.clone()) {
                let mut n = 2;
                let renamed = loop {
                    let candidate = format!("{}-{}", st.id, n);
                    if !seen.contains(&candidate) {
                        break candidate;
                    }
                    n += 1;
                };
                seen.insert(renamed.clone());
                st.id = renamed;
            }
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(&self.subtasks).unwrap_or(Value::Null)
    }

    /// Next plan version: the done prefix is kept verbatim and the revised
    /// subtasks replace everything after it. Revised entries that repeat a
    /// done subtask (same id, or a leading run with the same descriptions)
    /// are dropped. An empty remainder keeps the current one.
    pub fn revise_with(&self, revised: Vec<Subtask>) -> Plan {
        let prefix = self.done_prefix();
        let done_ids: BTreeSet<&str> = prefix.iter().map(|s| s.id.as_str()).collect();
        let mut leading = 0;
        let mut rest = Vec::new();
        let mut skipping = true;
        for mut st in revised {
            if done_ids.contains(st.id.as_str()) {
                continue;
            }
            if skipping
                && leading < prefix.len()
                && same_text(&prefix[leading].description, &st.description)
            {
                leading += 1;
                continue;
            }
            skipping = false;
            st.status = SubtaskStatus::Pending;
            rest.push(st);
        }
        if rest.is_empty() {
            rest = self.subtasks[prefix.len()..]
                .iter()
                .cloned()
                .map(|mut s| {
                    s.status = SubtaskStatus::Pending;
                    s
                })
                .collect();
        }
        let mut subtasks = prefix.to_vec();
        subtasks.extend(rest);
        Plan::new(self.version + 1, subtasks)
    }
}

fn same_text(a: &str, b: &str) -> bool {
    let norm = |s: &str| {
        s.split_whitespace()
            .map(str::to_lowercase)
            .collect::<Vec<_>>()
    };
    norm(a) == norm(b)
}

/// Mentor's verdict on one executed subtask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub observation: String,
    pub adjustment_needed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_revision: Option<String>,
}

impl Feedback {
    pub fn ok(observation: impl Into<String>) -> Self {
        Feedback {
            observation: observation.into(),
            adjustment_needed: false,
            suggested_revision: None,
        }
    }

    pub fn adjust(observation: impl Into<String>, suggestion: Option<String>) -> Self {
        Feedback {
            observation: observation.into(),
            adjustment_needed: true,
            suggested_revision: suggestion,
        }
    }

    /// Builds feedback from a Mentor body. `adjustment_needed` accepts
    /// booleans and the strings "true"/"yes"; a suggestion is dropped when no
    /// adjustment is requested.
    pub fn from_body(body: &crate::protocol::Body) -> Feedback {
        let observation = body
            .get("observation")
            .map(value_text)
            .unwrap_or_default();
        let adjustment_needed = match body.get("adjustment_needed") {
            Some(Value::Bool(b)) => *b,
            Some(Value::String(s)) => {
                let s = s.trim();
                s.eq_ignore_ascii_case("true") || s.eq_ignore_ascii_case("yes")
            }
            _ => false,
        };
        let suggested_revision = if adjustment_needed {
            body.get("suggested_revision")
                .filter(|v| !v.is_null())
                .map(value_text)
                .filter(|s| !s.trim().is_empty())
        } else {
            None
        };
        Feedback {
            observation,
            adjustment_needed,
            suggested_revision,
        }
    }

    pub fn to_body(&self) -> crate::protocol::Body {
        let mut body = crate::protocol::Body::new();
        body.insert("observation".to_string(), Value::String(self.observation.clone()));
        body.insert("adjustment_needed".to_string(), Value::Bool(self.adjustment_needed));
        if let Some(s) = &self.suggested_revision {
            body.insert("suggested_revision".to_string(), Value::String(s.clone()));
        }
        body
    }
}
