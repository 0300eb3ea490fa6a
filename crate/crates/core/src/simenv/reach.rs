use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::fixture::AppFixture;
use super::state::{candidate_actions, step, SimState};

/// Depth guard for exhaustive exploration.
pub const MAX_REACH_DEPTH: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("exploration depth {requested} exceeds the limit of {limit}")]
pub struct DepthExceeded {
    pub requested: usize,
    pub limit: usize,
}

/// States reachable within some number of actions, with the shortest
/// distance at which each was found.
#[derive(Debug, Clone, Default)]
pub struct Reachable {
    states: BTreeMap<alloc::string::String, (SimState, usize)>,
}

impl Reachable {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, state: &SimState) -> bool {
        self.states.contains_key(&state.canonical())
    }

    pub fn distance(&self, state: &SimState) -> Option<usize> {
        self.states.get(&state.canonical()).map(|(_, d)| *d)
    }

    pub fn states(&self) -> impl Iterator<Item = &SimState> {
        self.states.values().map(|(s, _)| s)
    }

    pub fn any(&self, f: impl FnMut(&SimState) -> bool) -> bool {
        self.states().any(f)
    }
}

/// Breadth-first search over every candidate action up to `depth` steps.
pub fn enumerate_reachable(
    fixture: &AppFixture,
    start: &SimState,
    depth: usize,
) -> Result<Reachable, DepthExceeded> {
    if depth > MAX_REACH_DEPTH {
        return Err(DepthExceeded {
            requested: depth,
            limit: MAX_REACH_DEPTH,
        });
    }
    let mut seen = Reachable::default();
    seen.states.insert(start.canonical(), (start.clone(), 0));
    let mut frontier: Vec<SimState> = alloc::vec![start.clone()];
    for d in 1..=depth {
        let mut next = Vec::new();
        for s in &frontier {
            for a in candidate_actions(fixture, s) {
                let (t, _) = step(fixture, s, &a);
                let k = t.canonical();
                if let alloc::collections::btree_map::Entry::Vacant(e) = seen.states.entry(k) {
                    e.insert((t.clone(), d));
                    next.push(t);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(seen)
}
