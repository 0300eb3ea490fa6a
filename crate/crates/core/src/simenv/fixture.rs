//! Declarative application fixtures.
//!
//! A fixture document lists screens and their elements, the state variables
//! with initial values, event-driven transitions, the finite text/key
//! vocabulary used for exhaustive exploration, and named goal predicates.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::goal::{Atom, GoalPredicate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Button,
    Textbox,
    ListItem,
    Label,
}

impl ElementKind {
    /// Words a description may use to refer to this kind of element.
    pub fn synonyms(self) -> &'static [&'static str] {
        match self {
            ElementKind::Button => &["button", "btn", "icon"],
            ElementKind::Textbox => &["textbox", "box", "field", "input", "bar"],
            ElementKind::ListItem => &["item", "entry", "row"],
            ElementKind::Label => &["label", "text"],
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementDef {
    pub id: String,
    pub kind: ElementKind,
    pub label: String,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "yes")]
    pub visible: bool,
    #[serde(default)]
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenDef {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub elements: Vec<ElementDef>,
}

impl ScreenDef {
    pub fn element(&self, id: &str) -> Option<&ElementDef> {
        self.elements.iter().find(|e| e.id == id)
    }
}

/// What fires a transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Click(String),
    Type(String),
    Press(String),
    Scroll(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarValue {
    pub var: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementValue {
    pub element: String,
    pub value: String,
}

/// Element references are `elem` (the transition's own screen) or
/// `screen/elem`. Values may use `$payload` and `$content:<elem>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Goto(String),
    Set(VarValue),
    Append(VarValue),
    Remove(VarValue),
    Show(String),
    Hide(String),
    Enable(String),
    Disable(String),
    Focus(String),
    SetContent(ElementValue),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDef {
    pub screen: String,
    pub on: Trigger,
    #[serde(default)]
    pub when: Vec<Atom>,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppFixture {
    pub name: String,
    /// Display name used by launch commands.
    pub app: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub initial_screen: String,
    pub launch_screen: String,
    pub screens: Vec<ScreenDef>,
    #[serde(default)]
    pub state_vars: BTreeMap<String, Value>,
    #[serde(default)]
    pub transitions: Vec<TransitionDef>,
    #[serde(default)]
    pub vocabulary: Vec<String>,
    #[serde(default)]
    pub keys: Vec<String>,
    #[serde(default)]
    pub goals: BTreeMap<String, GoalPredicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FixtureError {
    #[error("fixture document is not valid: {0}")]
    Decode(String),
    #[error("fixture `{fixture}`: {problem}")]
    Invalid { fixture: String, problem: String },
}

/// Splits an element reference into (screen, element).
pub(crate) fn resolve_ref<'a>(default_screen: &'a str, reference: &'a str) -> (&'a str, &'a str) {
    match reference.split_once('/') {
        Some((screen, elem)) => (screen, elem),
        None => (default_screen, reference),
    }
}

pub(crate) fn normalize_name(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl AppFixture {
    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let fixture: AppFixture =
            serde_json::from_str(text).map_err(|e| FixtureError::Decode(e.to_string()))?;
        fixture.validate()?;
        Ok(fixture)
    }

    pub fn screen(&self, id: &str) -> Option<&ScreenDef> {
        self.screens.iter().find(|s| s.id == id)
    }

    pub fn element(&self, screen: &str, id: &str) -> Option<&ElementDef> {
        self.screen(screen).and_then(|s| s.element(id))
    }

    pub fn goal(&self, name: &str) -> Option<&GoalPredicate> {
        self.goals.get(name)
    }

    pub fn matches_app(&self, name: &str) -> bool {
        let n = normalize_name(name);
        !n.is_empty()
            && (n == normalize_name(&self.app)
                || n == normalize_name(&self.name)
                || self.aliases.iter().any(|a| normalize_name(a) == n))
    }

    fn invalid(&self, problem: String) -> FixtureError {
        FixtureError::Invalid {
            fixture: self.name.clone(),
            problem,
        }
    }

    /// Structural checks: unique ids, and every screen/element/variable a
    /// transition or goal mentions exists.
    pub fn validate(&self) -> Result<(), FixtureError> {
        let mut screen_ids = BTreeSet::new();
        for s in &self.screens {
            if !screen_ids.insert(s.id.as_str()) {
                return Err(self.invalid(format!("duplicate screen `{}`", s.id)));
            }
            let mut ids = BTreeSet::new();
            for e in &s.elements {
                if !ids.insert(e.id.as_str()) {
                    return Err(self.invalid(format!("duplicate element `{}` on `{}`", e.id, s.id)));
                }
                if e.id.contains('/') {
                    return Err(self.invalid(format!("element id `{}` contains '/'", e.id)));
                }
            }
        }
        for s in [&self.initial_screen, &self.launch_screen] {
            if self.screen(s).is_none() {
                return Err(self.invalid(format!("unknown screen `{s}`")));
            }
        }
        let check_elem = |screen: &str, reference: &str| -> Result<(), FixtureError> {
            let (sc, el) = resolve_ref(screen, reference);
            let found = if sc == "*" {
                self.screens.iter().any(|s| s.element(el).is_some())
            } else {
                self.element(sc, el).is_some()
            };
            if !found {
                Err(self.invalid(format!("unknown element `{reference}` (screen `{screen}`)")))
            } else {
                Ok(())
            }
        };
        let check_var = |var: &str| -> Result<(), FixtureError> {
            if self.state_vars.contains_key(var) {
                Ok(())
            } else {
                Err(self.invalid(format!("unknown state variable `{var}`")))
            }
        };
        for (i, t) in self.transitions.iter().enumerate() {
            if self.screen(&t.screen).is_none() {
                return Err(self.invalid(format!("transition {i}: unknown screen `{}`", t.screen)));
            }
            match &t.on {
                Trigger::Click(e) | Trigger::Type(e) => check_elem(&t.screen, e)?,
                Trigger::Press(_) | Trigger::Scroll(_) => {}
            }
            if let Trigger::Type(e) = &t.on {
                let (sc, el) = resolve_ref(&t.screen, e);
                if self.element(sc, el).map(|d| d.kind) != Some(ElementKind::Textbox) {
                    return Err(self.invalid(format!("transition {i}: type trigger on non-textbox `{e}`")));
                }
            }
            for atom in &t.when {
                self.check_atom(atom, &t.screen, &check_elem, &check_var)?;
            }
            for eff in &t.effects {
                match eff {
                    Effect::Goto(s) => {
                        if self.screen(s).is_none() {
                            return Err(self.invalid(format!("transition {i}: goto unknown `{s}`")));
                        }
                    }
                    Effect::Set(vv) | Effect::Append(vv) | Effect::Remove(vv) => {
                        check_var(&vv.var)?;
                        self.check_template(&vv.value, &t.screen, &check_elem)?;
                    }
                    Effect::Show(e)
                    | Effect::Hide(e)
                    | Effect::Enable(e)
                    | Effect::Disable(e)
                    | Effect::Focus(e) => check_elem(&t.screen, e)?,
                    Effect::SetContent(ev) => {
                        check_elem(&t.screen, &ev.element)?;
                        self.check_template(&Value::String(ev.value.clone()), &t.screen, &check_elem)?;
                    }
                }
            }
        }
        for (name, goal) in &self.goals {
            if goal.all.is_empty() {
                return Err(self.invalid(format!("goal `{name}` has no atoms")));
            }
            for atom in &goal.all {
                if matches!(atom, Atom::PayloadEquals(_)) {
                    return Err(self.invalid(format!("goal `{name}` uses payload_equals")));
                }
                self.check_atom(atom, "*", &check_elem, &check_var)?;
            }
        }
        Ok(())
    }

    fn check_atom(
        &self,
        atom: &Atom,
        screen: &str,
        check_elem: &dyn Fn(&str, &str) -> Result<(), FixtureError>,
        check_var: &dyn Fn(&str) -> Result<(), FixtureError>,
    ) -> Result<(), FixtureError> {
        match atom {
            Atom::VarEquals(vv) | Atom::VarContains(vv) => check_var(&vv.var),
            Atom::ScreenIs(s) => {
                if self.screen(s).is_some() {
                    Ok(())
                } else {
                    Err(self.invalid(format!("unknown screen `{s}` in predicate")))
                }
            }
            Atom::ElementVisible(e) | Atom::ElementEnabled(e) => check_elem(screen, e),
            Atom::ContentEquals(ev) => check_elem(screen, &ev.element),
            Atom::PayloadEquals(_) => Ok(()),
            Atom::Not(inner) => self.check_atom(inner, screen, check_elem, check_var),
        }
    }

    fn check_template(
        &self,
        value: &Value,
        screen: &str,
        check_elem: &dyn Fn(&str, &str) -> Result<(), FixtureError>,
    ) -> Result<(), FixtureError> {
        match value {
            Value::String(s) => {
                if let Some(r) = s.strip_prefix("$content:") {
                    check_elem(screen, r)?;
                }
                Ok(())
            }
            Value::Array(items) => items
                .iter()
                .try_for_each(|v| self.check_template(v, screen, check_elem)),
            Value::Object(map) => map
                .values()
                .try_for_each(|v| self.check_template(v, screen, check_elem)),
            _ => Ok(()),
        }
    }
}
