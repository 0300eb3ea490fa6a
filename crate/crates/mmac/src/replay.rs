//! Offline re-execution of a recorded trace.
//!
//! Every recorded GUI action is stepped again against the fixture the trace
//! names, starting from the recorded initial state. The replay holds when
//! each step reproduces its recorded report and the final state matches the
//! trace's result record.

use mmac_core::orchestrator::{Trace, TraceRecord};
use mmac_core::simenv::{step, SimState};
use serde::Serialize;

use crate::fixtures::FixtureLibrary;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplayReport {
    pub env: String,
    pub actions: usize,
    pub rounds_used: Option<u32>,
    /// Empty when the replay matched.
    pub problems: Vec<String>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

fn structure(trace: &Trace, problems: &mut Vec<String>) {
    let recs = trace.records();
    if !matches!(recs.first(), Some(TraceRecord::Start { .. })) {
        problems.push("trace does not begin with a start record".into());
    }
    if !matches!(recs.last(), Some(TraceRecord::Result { .. })) {
        problems.push("trace does not end with a result record".into());
    }
    let mut last_round = 0;
    for (i, r) in recs.iter().enumerate() {
        if let Some(round) = r.round() {
            if round < last_round {
                problems.push(format!("record {}: round {round} after round {last_round}", i + 1));
            }
            last_round = round;
        }
    }
    let mut last_version = 0;
    for v in trace.plan_versions() {
        if v < last_version {
            problems.push(format!("plan version {v} after {last_version}"));
        }
        last_version = v;
    }
}

/// Replays `trace`. Headless traces (no fixture) get the structural checks
/// only.
pub fn replay(trace: &Trace, lib: &FixtureLibrary) -> ReplayReport {
    let mut rep = ReplayReport::default();
    structure(trace, &mut rep.problems);
    let recs = trace.records();
    let (env, start_state) = match recs.first() {
        Some(TraceRecord::Start { env, state, .. }) => (env.clone(), state.clone()),
        _ => return rep,
    };
    rep.env = env.clone();
    rep.actions = trace.actions().count();
    if let Some(TraceRecord::Result { rounds_used, .. }) = recs.last() {
        rep.rounds_used = Some(*rounds_used);
    }
    let Some(fixture) = lib.get(&env) else {
        if !start_state.is_null() {
            rep.problems.push(format!("fixture `{env}` not found"));
        }
        return rep;
    };
    let mut state: SimState = match serde_json::from_value(start_state) {
        Ok(s) => s,
        Err(e) => {
            rep.problems.push(format!("initial state unreadable: {e}"));
            return rep;
        }
    };
    if state != SimState::initial(fixture) {
        rep.problems.push("recorded initial state differs from the fixture's".into());
    }
    for (i, r) in recs.iter().enumerate() {
        if let TraceRecord::Action { action, report, .. } = r {
            let (next, got) = step(fixture, &state, action);
            if &got != report {
                rep.problems.push(format!(
                    "record {}: {action} replayed as {:?}, recorded {:?}",
                    i + 1,
                    got,
                    report
                ));
            }
            state = next;
        }
    }
    if let Some(TraceRecord::Result { final_state, .. }) = recs.last() {
        let replayed = serde_json::to_value(&state).unwrap_or_default();
        if &replayed != final_state {
            rep.problems.push("replayed final state differs from the recorded one".into());
        }
    }
    rep
}
