use alloc::string::{String, ToString};

use core::fmt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Launch,
    Click,
    Type,
    Press,
    Scroll,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Element(String),
    Coordinates { x: i32, y: i32 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionError {
    #[error("{0:?} requires a target")]
    MissingTarget(ActionKind),
    #[error("{0:?} requires a payload")]
    MissingPayload(ActionKind),
}

#[derive(Deserialize)]
struct RawAction {
    kind: ActionKind,
    #[serde(default)]
    target: Option<Target>,
    #[serde(default)]
    payload: Option<String>,
}

/// One GUI interaction. Clicks need a target; type, press and launch need a
/// payload (text, key name, application name).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawAction")]
pub struct UIAction {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl TryFrom<RawAction> for UIAction {
    type Error = ActionError;

    fn try_from(raw: RawAction) -> Result<Self, Self::Error> {
        UIAction::new(raw.kind, raw.target, raw.payload)
    }
}

impl UIAction {
    pub fn new(
        kind: ActionKind,
        target: Option<Target>,
        payload: Option<String>,
    ) -> Result<Self, ActionError> {
        let payload = payload.filter(|p| !p.is_empty());
        match kind {
            ActionKind::Click if target.is_none() => return Err(ActionError::MissingTarget(kind)),
            ActionKind::Type | ActionKind::Press | ActionKind::Launch if payload.is_none() => {
                return Err(ActionError::MissingPayload(kind))
            }
            _ => {}
        }
        Ok(UIAction {
            kind,
            target,
            payload,
        })
    }

    pub fn click(element: impl Into<String>) -> Self {
        UIAction {
            kind: ActionKind::Click,
            target: Some(Target::Element(element.into())),
            payload: None,
        }
    }

    pub fn type_text(text: impl Into<String>) -> Self {
        UIAction {
            kind: ActionKind::Type,
            target: None,
            payload: Some(text.into()),
        }
    }

    pub fn press(key: impl Into<String>) -> Self {
        UIAction {
            kind: ActionKind::Press,
            target: None,
            payload: Some(key.into()),
        }
    }

    pub fn launch(app: impl Into<String>) -> Self {
        UIAction {
            kind: ActionKind::Launch,
            target: None,
            payload: Some(app.into()),
        }
    }

    pub fn scroll(direction: impl Into<String>) -> Self {
        UIAction {
            kind: ActionKind::Scroll,
            target: None,
            payload: Some(direction.into()),
        }
    }

    pub fn with_target(mut self, element: impl Into<String>) -> Self {
        self.target = Some(Target::Element(element.into()));
        self
    }

    pub fn element(&self) -> Option<&str> {
        match &self.target {
            Some(Target::Element(id)) => Some(id),
            _ => None,
        }
    }
}

impl fmt::Display for UIAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ActionKind::Launch => "launch",
            ActionKind::Click => "click",
            ActionKind::Type => "type",
            ActionKind::Press => "press",
            ActionKind::Scroll => "scroll",
        };
        f.write_str(kind)?;
        f.write_str("(")?;
        let mut sep = "";
        match &self.target {
            Some(Target::Element(id)) => {
                f.write_str(id)?;
                sep = ", ";
            }
            Some(Target::Coordinates { x, y }) => {
                write!(f, "{x},{y}")?;
                sep = ", ";
            }
            None => {}
        }
        if let Some(p) = &self.payload {
            write!(f, "{sep}{:?}", p.to_string())?;
        }
        f.write_str(")")
    }
}
