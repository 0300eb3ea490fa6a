//! Predicates over simulator state, used both as transition guards and as
//! benchmark goals.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::fixture::{resolve_ref, AppFixture, ElementValue, VarValue};
use super::state::SimState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    VarEquals(VarValue),
    /// List variable holds a matching item (objects match on a subset of
    /// fields), or string variable contains the text.
    VarContains(VarValue),
    ScreenIs(alloc::string::String),
    ElementVisible(alloc::string::String),
    ElementEnabled(alloc::string::String),
    ContentEquals(ElementValue),
    /// Only meaningful in transition guards.
    PayloadEquals(alloc::string::String),
    Not(Box<Atom>),
}

/// Conjunction of atoms over the final state only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalPredicate {
    pub all: Vec<Atom>,
}

/// Structural match: equal scalars, strings compared case-insensitively, and
/// objects matching on every field the pattern names.
pub fn value_matches(item: &Value, pattern: &Value) -> bool {
    match (item, pattern) {
        (Value::String(a), Value::String(b)) => a.eq_ignore_ascii_case(b),
        (Value::Object(a), Value::Object(b)) => b
            .iter()
            .all(|(k, pv)| a.get(k).is_some_and(|iv| value_matches(iv, pv))),
        (a, b) => a == b,
    }
}

fn contains(haystack: &Value, needle: &Value) -> bool {
    match haystack {
        Value::Array(items) => items.iter().any(|i| value_matches(i, needle)),
        Value::String(s) => match needle {
            Value::String(n) => s.to_lowercase().contains(&n.to_lowercase()),
            _ => false,
        },
        _ => false,
    }
}

impl Atom {
    pub fn eval(&self, fixture: &AppFixture, state: &SimState, payload: Option<&str>) -> bool {
        match self {
            Atom::VarEquals(vv) => state
                .vars
                .get(&vv.var)
                .is_some_and(|v| value_matches(v, &vv.value)),
            Atom::VarContains(vv) => state.vars.get(&vv.var).is_some_and(|v| contains(v, &vv.value)),
            Atom::ScreenIs(s) => state.screen == *s,
            Atom::ElementVisible(r) => {
                let (sc, el) = resolve_ref(&state.screen, r);
                sc == state.screen && state.element(fixture, sc, el).is_some_and(|e| e.visible)
            }
            Atom::ElementEnabled(r) => {
                let (sc, el) = resolve_ref(&state.screen, r);
                state
                    .element(fixture, sc, el)
                    .is_some_and(|e| e.visible && e.enabled)
            }
            Atom::ContentEquals(ev) => {
                let (sc, el) = resolve_ref(&state.screen, &ev.element);
                state
                    .element(fixture, sc, el)
                    .is_some_and(|e| e.content.eq_ignore_ascii_case(&ev.value))
            }
            Atom::PayloadEquals(p) => payload.is_some_and(|x| {
                super::fixture::normalize_name(x) == super::fixture::normalize_name(p)
            }),
            Atom::Not(inner) => !inner.eval(fixture, state, payload),
        }
    }
}

impl GoalPredicate {
    pub fn holds(&self, fixture: &AppFixture, state: &SimState) -> bool {
        self.all.iter().all(|a| a.eval(fixture, state, None))
    }
}

/// Whether `state` satisfies goal `g`. Only the final state matters; how it
/// was reached does not.
pub fn check_goal(fixture: &AppFixture, state: &SimState, g: &GoalPredicate) -> bool {
    g.holds(fixture, state)
}
