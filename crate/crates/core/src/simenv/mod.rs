//! Deterministic simulated desktop. Applications are declarative state
//! machines; screenshots are structured element lists.

mod desktop;
mod fixture;
mod goal;
mod ground;
mod reach;
mod state;
mod video;

pub use desktop::{launch_target, SimDesktop};
pub use fixture::{
    AppFixture, Effect, ElementDef, ElementKind, ElementValue, FixtureError, ScreenDef,
    TransitionDef, Trigger, VarValue,
};
pub use goal::{check_goal, value_matches, Atom, GoalPredicate};
pub use ground::{ground, normalize, GroundError, Grounding};
pub use reach::{enumerate_reachable, DepthExceeded, Reachable, MAX_REACH_DEPTH};
pub use state::{
    candidate_actions, render, step, ElemState, RenderedElement, Screenshot, SimState, StepReport,
};
pub use video::{frame_events, Frame, NonMonotonicFrames, VideoClip, VideoEvent};
