use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::fixture::{normalize_name, resolve_ref, AppFixture, Effect, ElementKind, Trigger};
use super::goal::value_matches;
use crate::action::{ActionKind, Target, UIAction};

/// Mutable attributes of one element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElemState {
    pub enabled: bool,
    pub visible: bool,
    pub content: String,
}

/// Full simulator state. Plain data, cheap to clone, totally ordered via its
/// canonical JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub screen: String,
    #[serde(default)]
    pub focused: Option<String>,
    pub vars: BTreeMap<String, Value>,
    /// Keyed by `screen/element`.
    pub elements: BTreeMap<String, ElemState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedElement {
    pub id: String,
    pub kind: ElementKind,
    pub label: String,
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub content: String,
}

/// Structured stand-in for a screen capture: the visible elements of the
/// current screen and the focused element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screenshot {
    pub screen_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub title: String,
    pub elements: Vec<RenderedElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focused: Option<String>,
}

impl Screenshot {
    pub fn element(&self, id: &str) -> Option<&RenderedElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// Outcome of one [`step`]. `fault` explains a rejected action; the state is
/// unchanged in that case.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepReport {
    pub changed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

fn key(screen: &str, elem: &str) -> String {
    format!("{screen}/{elem}")
}

impl SimState {
    pub fn initial(fixture: &AppFixture) -> SimState {
        let mut elements = BTreeMap::new();
        for s in &fixture.screens {
            for e in &s.elements {
                elements.insert(
                    key(&s.id, &e.id),
                    ElemState {
                        enabled: e.enabled,
                        visible: e.visible,
                        content: e.content.clone(),
                    },
                );
            }
        }
        SimState {
            screen: fixture.initial_screen.clone(),
            focused: None,
            vars: fixture.state_vars.clone(),
            elements,
        }
    }

    pub fn element(&self, _fixture: &AppFixture, screen: &str, elem: &str) -> Option<&ElemState> {
        self.elements.get(&key(screen, elem))
    }

    fn element_mut(&mut self, screen: &str, elem: &str) -> Option<&mut ElemState> {
        self.elements.get_mut(&key(screen, elem))
    }

    /// Deterministic serialization, used for equality sets and traces.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

fn fill_template(value: &Value, screen: &str, state: &SimState, payload: Option<&str>) -> Value {
    match value {
        Value::String(s) if s == "$payload" => Value::String(payload.unwrap_or_default().to_string()),
        Value::String(s) => match s.strip_prefix("$content:") {
            Some(r) => {
                let (sc, el) = resolve_ref(screen, r);
                Value::String(
                    state
                        .elements
                        .get(&key(sc, el))
                        .map(|e| e.content.clone())
                        .unwrap_or_default(),
                )
            }
            None => value.clone(),
        },
        Value::Array(items) => Value::Array(
            items
                .iter()
                .map(|v| fill_template(v, screen, state, payload))
                .collect(),
        ),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), fill_template(v, screen, state, payload)))
                .collect(),
        ),
        other => other.clone(),
    }
}

fn apply_effects(
    state: &mut SimState,
    screen: &str,
    effects: &[Effect],
    payload: Option<&str>,
) {
    for eff in effects {
        match eff {
            Effect::Goto(s) => {
                if state.screen != *s {
                    state.screen = s.clone();
                    state.focused = None;
                }
            }
            Effect::Set(vv) => {
                let v = fill_template(&vv.value, screen, state, payload);
                state.vars.insert(vv.var.clone(), v);
            }
            Effect::Append(vv) => {
                let v = fill_template(&vv.value, screen, state, payload);
                match state.vars.get_mut(&vv.var) {
                    Some(Value::Array(items)) => items.push(v),
                    Some(other) => *other = Value::Array(alloc::vec![v]),
                    None => {
                        state.vars.insert(vv.var.clone(), Value::Array(alloc::vec![v]));
                    }
                }
            }
            Effect::Remove(vv) => {
                let pattern = fill_template(&vv.value, screen, state, payload);
                if let Some(Value::Array(items)) = state.vars.get_mut(&vv.var) {
                    items.retain(|i| !value_matches(i, &pattern));
                }
            }
            Effect::Show(r) | Effect::Hide(r) | Effect::Enable(r) | Effect::Disable(r) => {
                let (sc, el) = resolve_ref(screen, r);
                if let Some(e) = state.element_mut(sc, el) {
                    match eff {
                        Effect::Show(_) => e.visible = true,
                        Effect::Hide(_) => e.visible = false,
                        Effect::Enable(_) => e.enabled = true,
                        _ => e.enabled = false,
                    }
                }
                if matches!(eff, Effect::Hide(_) | Effect::Disable(_))
                    && sc == state.screen
                    && state.focused.as_deref() == Some(el)
                {
                    state.focused = None;
                }
            }
            Effect::Focus(r) => {
                let (sc, el) = resolve_ref(screen, r);
                if sc == state.screen {
                    state.focused = Some(el.to_string());
                }
            }
            Effect::SetContent(ev) => {
                let v = fill_template(&Value::String(ev.value.clone()), screen, state, payload);
                let (sc, el) = resolve_ref(screen, &ev.element);
                if let (Some(e), Value::String(s)) = (state.element_mut(sc, el), v) {
                    e.content = s;
                }
            }
        }
    }
}

fn fire(
    fixture: &AppFixture,
    state: &mut SimState,
    matches: impl Fn(&Trigger) -> bool,
    payload: Option<&str>,
) -> bool {
    let screen = state.screen.clone();
    let found = fixture.transitions.iter().find(|t| {
        t.screen == screen && matches(&t.on) && t.when.iter().all(|a| a.eval(fixture, state, payload))
    });
    match found {
        Some(t) => {
            let effects = t.effects.clone();
            apply_effects(state, &screen, &effects, payload);
            true
        }
        None => false,
    }
}

fn elem_trigger_matches(screen: &str, reference: &str, target: &str) -> bool {
    let (sc, el) = resolve_ref(screen, reference);
    sc == screen && el == target
}

fn noop(state: &SimState, fault: String) -> (SimState, StepReport) {
    (
        state.clone(),
        StepReport {
            changed: false,
            fault: Some(fault),
        },
    )
}

/// Applies one action. Unknown, hidden or disabled targets leave the state
/// unchanged and report a fault note instead of failing.
pub fn step(fixture: &AppFixture, state: &SimState, action: &UIAction) -> (SimState, StepReport) {
    let mut next = state.clone();
    let screen = state.screen.clone();
    match action.kind {
        ActionKind::Launch => {
            let app = action.payload.as_deref().unwrap_or_default();
            if !fixture.matches_app(app) {
                return noop(state, format!("no application named `{app}`"));
            }
            if state.screen == fixture.initial_screen {
                next.screen = fixture.launch_screen.clone();
                next.focused = None;
                if next.vars.contains_key("running") {
                    next.vars.insert("running".to_string(), Value::Bool(true));
                }
            }
        }
        ActionKind::Click => {
            let id = match &action.target {
                Some(Target::Element(id)) => id.clone(),
                Some(Target::Coordinates { x, y }) => {
                    return noop(state, format!("nothing to resolve at ({x},{y}) in the simulator"))
                }
                None => return noop(state, "click without target".to_string()),
            };
            let def = match fixture.element(&screen, &id) {
                Some(d) => d,
                None => return noop(state, format!("no element `{id}` on screen `{screen}`")),
            };
            let es = &state.elements[&key(&screen, &id)];
            if !es.visible {
                return noop(state, format!("element `{id}` is not visible"));
            }
            if !es.enabled {
                return noop(state, format!("element `{id}` is disabled"));
            }
            next.focused = if def.kind == ElementKind::Textbox {
                Some(id.clone())
            } else {
                None
            };
            fire(
                fixture,
                &mut next,
                |t| matches!(t, Trigger::Click(r) if elem_trigger_matches(&screen, r, &id)),
                None,
            );
        }
        ActionKind::Type => {
            let text = action.payload.clone().unwrap_or_default();
            let focused = match &state.focused {
                Some(f) => f.clone(),
                None => return noop(state, "no focused text box to type into".to_string()),
            };
            if let Some(t) = action.element() {
                if t != focused {
                    return noop(state, format!("element `{t}` is not focused"));
                }
            }
            let usable = fixture
                .element(&screen, &focused)
                .is_some_and(|d| d.kind == ElementKind::Textbox)
                && state
                    .elements
                    .get(&key(&screen, &focused))
                    .is_some_and(|e| e.visible && e.enabled);
            if !usable {
                return noop(state, format!("focused element `{focused}` does not accept text"));
            }
            if let Some(e) = next.element_mut(&screen, &focused) {
                e.content = text.clone();
            }
            fire(
                fixture,
                &mut next,
                |t| matches!(t, Trigger::Type(r) if elem_trigger_matches(&screen, r, &focused)),
                Some(&text),
            );
        }
        ActionKind::Press => {
            let k = action.payload.clone().unwrap_or_default();
            let nk = normalize_name(&k);
            let fired = fire(
                fixture,
                &mut next,
                |t| matches!(t, Trigger::Press(p) if normalize_name(p) == nk),
                Some(&k),
            );
            if !fired {
                return noop(state, format!("key `{k}` has no effect here"));
            }
        }
        ActionKind::Scroll => {
            let dir = action.payload.clone().unwrap_or_else(|| "down".to_string());
            let nd = normalize_name(&dir);
            let fired = fire(
                fixture,
                &mut next,
                |t| matches!(t, Trigger::Scroll(p) if normalize_name(p) == nd),
                Some(&dir),
            );
            if !fired {
                return noop(state, format!("scrolling {dir} has no effect here"));
            }
        }
    }
    let changed = next != *state;
    (next, StepReport { changed, fault: None })
}

/// Projection of the current screen's visible elements.
pub fn render(fixture: &AppFixture, state: &SimState) -> Screenshot {
    let screen = fixture.screen(&state.screen);
    let elements = screen
        .map(|s| {
            s.elements
                .iter()
                .filter_map(|d| {
                    let es = state.elements.get(&key(&s.id, &d.id))?;
                    es.visible.then(|| RenderedElement {
                        id: d.id.clone(),
                        kind: d.kind,
                        label: d.label.clone(),
                        enabled: es.enabled,
                        content: es.content.clone(),
                    })
                })
                .collect()
        })
        .unwrap_or_default();
    Screenshot {
        screen_id: state.screen.clone(),
        title: screen.map(|s| s.title.clone()).unwrap_or_default(),
        elements,
        focused: state.focused.clone(),
    }
}

/// Every well-formed action worth trying from `state`: clicks on visible
/// elements, each vocabulary string typed, each key pressed, scroll in both
/// directions when the fixture reacts to scrolling, and launching the app.
pub fn candidate_actions(fixture: &AppFixture, state: &SimState) -> Vec<UIAction> {
    let mut out = Vec::new();
    out.push(UIAction::launch(fixture.app.clone()));
    if let Some(s) = fixture.screen(&state.screen) {
        for e in &s.elements {
            if state.elements.get(&key(&s.id, &e.id)).is_some_and(|x| x.visible) {
                out.push(UIAction::click(e.id.clone()));
            }
        }
    }
    if state.focused.is_some() {
        for word in &fixture.vocabulary {
            out.push(UIAction::type_text(word.clone()));
        }
    }
    for k in &fixture.keys {
        out.push(UIAction::press(k.clone()));
    }
    let scrolls = fixture
        .transitions
        .iter()
        .any(|t| matches!(t.on, Trigger::Scroll(_)));
    if scrolls {
        out.push(UIAction::scroll("up"));
        out.push(UIAction::scroll("down"));
    }
    out
}
