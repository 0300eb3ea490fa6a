//! Role-keyed structured messages.
//!
//! Every agent replies with a JSON object. The [`KeyPolicy`] fixes which keys
//! each role may emit and which roles receive each key; [`route`] projects a
//! validated message into one body per recipient so an agent never sees keys
//! it is not entitled to.

mod extract;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use extract::{extract_object, parse_model_output};

/// The six agents of the team. The set is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentRole {
    Planner,
    Librarian,
    Programmer,
    Viewer,
    VideoAnalyst,
    Mentor,
}

impl AgentRole {
    pub const ALL: [AgentRole; 6] = [
        AgentRole::Planner,
        AgentRole::Librarian,
        AgentRole::Programmer,
        AgentRole::Viewer,
        AgentRole::VideoAnalyst,
        AgentRole::Mentor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Planner => "Planner",
            AgentRole::Librarian => "Librarian",
            AgentRole::Programmer => "Programmer",
            AgentRole::Viewer => "Viewer",
            AgentRole::VideoAnalyst => "VideoAnalyst",
            AgentRole::Mentor => "Mentor",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = ProtocolError;

    /// Accepts the canonical names plus common spellings ("video analyst",
    /// "video_analyst", any case).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match folded.as_str() {
            "planner" => Ok(AgentRole::Planner),
            "librarian" => Ok(AgentRole::Librarian),
            "programmer" => Ok(AgentRole::Programmer),
            "viewer" => Ok(AgentRole::Viewer),
            "videoanalyst" => Ok(AgentRole::VideoAnalyst),
            "mentor" => Ok(AgentRole::Mentor),
            _ => Err(ProtocolError::UnknownRole(s.to_string())),
        }
    }
}

/// Message body: key to opaque JSON value.
pub type Body = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("message body is empty")]
    EmptyBody,
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("role {role} has no emit rule in the active policy")]
    RoleNotInPolicy { role: AgentRole },
    #[error("keys not permitted for {sender}: {}", .keys.join(", "))]
    ForbiddenKeys { sender: AgentRole, keys: Vec<String> },
    #[error("no JSON object found in model output")]
    ParseError,
    #[error("policy is malformed: {0}")]
    MalformedPolicy(String),
}

/// Which keys each role may emit, and who receives each key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPolicy {
    pub emit_rules: BTreeMap<AgentRole, BTreeSet<String>>,
    pub receive_rules: BTreeMap<String, BTreeSet<AgentRole>>,
}

pub const OBSERVATION: &str = "observation";

fn set<T: Ord + Clone>(items: &[T]) -> BTreeSet<T> {
    items.iter().cloned().collect()
}

fn keys(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|k| k.to_string()).collect()
}

impl KeyPolicy {
    /// The policy used by the shipped agents.
    pub fn canonical() -> Self {
        use AgentRole::*;
        let emit_rules = BTreeMap::from([
            (Planner, keys(&["plan", "revision_note"])),
            (Librarian, keys(&["answer", "sources"])),
            (Programmer, keys(&["code", "execution_report"])),
            (Viewer, keys(&["observation", "ui_action", "refinement"])),
            (VideoAnalyst, keys(&["events"])),
            (
                Mentor,
                keys(&["observation", "adjustment_needed", "suggested_revision"]),
            ),
        ]);
        let receive_rules = BTreeMap::from([
            (
                "plan".to_string(),
                set(&[Librarian, Programmer, Viewer, VideoAnalyst, Mentor]),
            ),
            ("revision_note".to_string(), set(&[Mentor])),
            ("answer".to_string(), set(&[Planner, Programmer])),
            ("sources".to_string(), set(&[Planner])),
            ("code".to_string(), set(&[Mentor])),
            ("execution_report".to_string(), set(&[Planner, Mentor])),
            (OBSERVATION.to_string(), set(&[Planner])),
            ("ui_action".to_string(), set(&[Mentor])),
            ("refinement".to_string(), set(&[Planner])),
            ("events".to_string(), set(&[Planner, Librarian])),
            ("adjustment_needed".to_string(), set(&[Planner])),
            ("suggested_revision".to_string(), set(&[Planner])),
        ]);
        KeyPolicy {
            emit_rules,
            receive_rules,
        }
    }

    /// Checks the structural invariants: every received key is emittable by
    /// someone, and the observation key stays between Mentor/Viewer and the
    /// Planner.
    pub fn check(&self) -> Result<(), ProtocolError> {
        for key in self.receive_rules.keys() {
            if !self.emit_rules.values().any(|ks| ks.contains(key)) {
                return Err(ProtocolError::MalformedPolicy(alloc::format!(
                    "key `{key}` is received but never emitted"
                )));
            }
        }
        for (role, ks) in &self.emit_rules {
            if ks.contains(OBSERVATION)
                && !matches!(role, AgentRole::Mentor | AgentRole::Viewer)
            {
                return Err(ProtocolError::MalformedPolicy(alloc::format!(
                    "{role} may not emit `observation`"
                )));
            }
        }
        if let Some(rs) = self.receive_rules.get(OBSERVATION) {
            if rs.iter().any(|r| *r != AgentRole::Planner) {
                return Err(ProtocolError::MalformedPolicy(
                    "`observation` is receivable only by the Planner".to_string(),
                ));
            }
        }
        Ok(())
    }

    pub fn may_emit(&self, role: AgentRole, key: &str) -> bool {
        self.emit_rules
            .get(&role)
            .is_some_and(|ks| ks.contains(key))
    }

    pub fn receivers(&self, key: &str) -> impl Iterator<Item = AgentRole> + '_ {
        self.receive_rules.get(key).into_iter().flatten().copied()
    }

    /// Keys a role is allowed to receive.
    pub fn receivable_by(&self, role: AgentRole) -> BTreeSet<&str> {
        self.receive_rules
            .iter()
            .filter(|(_, rs)| rs.contains(&role))
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn emit_keys(&self, role: AgentRole) -> Vec<&str> {
        self.emit_rules
            .get(&role)
            .map(|ks| ks.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }
}

/// A structured message from one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub round: u32,
    pub sender: AgentRole,
    pub body: Body,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask_id: Option<String>,
}

impl AgentMessage {
    pub fn new(sender: AgentRole, round: u32, body: Body) -> Self {
        AgentMessage {
            round,
            sender,
            body,
            subtask_id: None,
        }
    }

    pub fn with_subtask(mut self, id: impl Into<String>) -> Self {
        self.subtask_id = Some(id.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.body.get(key)
    }

    pub fn text(&self, key: &str) -> Option<String> {
        self.body.get(key).map(value_text)
    }
}

/// Renders a JSON value as plain text: strings unquoted, everything else as
/// compact JSON.
pub fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Result of [`validate_message`]: Ok, or the offending keys.
pub fn validate_message(msg: &AgentMessage, policy: &KeyPolicy) -> Result<(), ProtocolError> {
    if msg.body.is_empty() {
        return Err(ProtocolError::EmptyBody);
    }
    let allowed = policy
        .emit_rules
        .get(&msg.sender)
        .ok_or(ProtocolError::RoleNotInPolicy { role: msg.sender })?;
    let offending: Vec<String> = msg
        .body
        .keys()
        .filter(|k| !allowed.contains(k.as_str()))
        .cloned()
        .collect();
    if offending.is_empty() {
        Ok(())
    } else {
        Err(ProtocolError::ForbiddenKeys {
            sender: msg.sender,
            keys: offending,
        })
    }
}

/// Projects a validated message per recipient. Roles with nothing to receive
/// are absent from the result.
pub fn route(msg: &AgentMessage, policy: &KeyPolicy) -> BTreeMap<AgentRole, Body> {
    let mut out: BTreeMap<AgentRole, Body> = BTreeMap::new();
    for (key, value) in &msg.body {
        for role in policy.receivers(key) {
            out.entry(role)
                .or_default()
                .insert(key.clone(), value.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use serde_json::json;

    fn body(pairs: &[(&str, Value)]) -> Body {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    #[test]
    fn canonical_policy_is_well_formed() {
        KeyPolicy::canonical().check().unwrap();
    }

    #[test]
    fn mentor_observation_is_valid() {
        let p = KeyPolicy::canonical();
        let m = AgentMessage::new(
            AgentRole::Mentor,
            1,
            body(&[
                ("observation", json!("chat shows the new message")),
                ("adjustment_needed", json!(false)),
            ]),
        );
        assert_eq!(validate_message(&m, &p), Ok(()));
    }

    #[test]
    fn programmer_cannot_emit_observation() {
        let p = KeyPolicy::canonical();
        let m = AgentMessage::new(
            AgentRole::Programmer,
            1,
            body(&[("code", json!("ls")), ("observation", json!("x"))]),
        );
        assert_eq!(
            validate_message(&m, &p),
            Err(ProtocolError::ForbiddenKeys {
                sender: AgentRole::Programmer,
                keys: vec!["observation".into()]
            })
        );
    }

    #[test]
    fn empty_body_rejected() {
        let p = KeyPolicy::canonical();
        let m = AgentMessage::new(AgentRole::Viewer, 0, Body::new());
        assert_eq!(validate_message(&m, &p), Err(ProtocolError::EmptyBody));
    }

    #[test]
    fn role_missing_from_policy() {
        let mut p = KeyPolicy::canonical();
        p.emit_rules.remove(&AgentRole::VideoAnalyst);
        let m = AgentMessage::new(AgentRole::VideoAnalyst, 0, body(&[("events", json!([]))]));
        assert!(matches!(
            validate_message(&m, &p),
            Err(ProtocolError::RoleNotInPolicy { .. })
        ));
    }

    #[test]
    fn mentor_feedback_goes_to_planner_only() {
        let p = KeyPolicy::canonical();
        let m = AgentMessage::new(
            AgentRole::Mentor,
            3,
            body(&[
                ("observation", json!("...")),
                ("adjustment_needed", json!(true)),
            ]),
        );
        let routed = route(&m, &p);
        assert_eq!(routed.len(), 1);
        let planner = &routed[&AgentRole::Planner];
        assert_eq!(
            planner.keys().map(String::as_str).collect::<Vec<_>>(),
            ["adjustment_needed", "observation"]
        );
    }

    #[test]
    fn single_key_projection() {
        let mut p = KeyPolicy::canonical();
        p.receive_rules
            .insert("answer".into(), set(&[AgentRole::Planner]));
        let m = AgentMessage::new(AgentRole::Librarian, 1, body(&[("answer", json!("Paris"))]));
        let routed = route(&m, &p);
        assert_eq!(routed.len(), 1);
        assert_eq!(routed[&AgentRole::Planner]["answer"], json!("Paris"));
    }

    #[test]
    fn unroutable_message_goes_nowhere() {
        let mut p = KeyPolicy::canonical();
        p.receive_rules.remove("events");
        let m = AgentMessage::new(AgentRole::VideoAnalyst, 1, body(&[("events", json!([]))]));
        assert!(route(&m, &p).is_empty());
    }

    #[test]
    fn policy_check_catches_leaked_observation() {
        let mut p = KeyPolicy::canonical();
        p.receive_rules
            .get_mut(OBSERVATION)
            .unwrap()
            .insert(AgentRole::Programmer);
        assert!(p.check().is_err());

        let mut p = KeyPolicy::canonical();
        p.emit_rules
            .get_mut(&AgentRole::Librarian)
            .unwrap()
            .insert(OBSERVATION.into());
        assert!(p.check().is_err());

        let mut p = KeyPolicy::canonical();
        p.receive_rules.insert("ghost".into(), set(&[AgentRole::Planner]));
        assert!(p.check().is_err());
    }

    #[test]
    fn role_parsing_accepts_spellings() {
        assert_eq!("video analyst".parse::<AgentRole>(), Ok(AgentRole::VideoAnalyst));
        assert_eq!("VIDEO_ANALYST".parse::<AgentRole>(), Ok(AgentRole::VideoAnalyst));
        assert_eq!("mentor".parse::<AgentRole>(), Ok(AgentRole::Mentor));
        assert!("wizard".parse::<AgentRole>().is_err());
    }
}
