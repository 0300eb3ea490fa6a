//! What an episode acts upon.

use alloc::string::String;
use alloc::vec::Vec;

use serde_json::Value;

use crate::action::UIAction;
use crate::codex::{CodeArtifact, CodexError, ExecutionEnv, ExecutionOutcome, Executor};
use crate::simenv::{Screenshot, StepReport, VideoClip};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("environment fault: {0}")]
    EnvironmentFault(String),
}

pub trait Environment {
    /// Short name recorded in traces (fixture name for simulated desktops).
    fn label(&self) -> String;
    /// `None` when there is no screen (question answering).
    fn screenshot(&self) -> Option<Screenshot>;
    fn apply(&mut self, action: &UIAction) -> Result<StepReport, EnvError>;
    fn run_code(&mut self, code: &CodeArtifact) -> Result<ExecutionOutcome, CodexError>;
    fn recording(&self) -> Option<VideoClip>;
    /// Serializable state for traces.
    fn snapshot(&self) -> Value;
    /// GUI actions applied since the last call, including ones caused by
    /// code (e.g. a launch command).
    fn drain_applied(&mut self) -> Vec<(UIAction, StepReport)> {
        Vec::new()
    }
}

/// No screen; code goes to an executor when one is configured.
pub struct Headless<'a> {
    executor: Option<&'a mut dyn Executor>,
    pub exec_env: ExecutionEnv,
    pub clip: Option<VideoClip>,
}

impl<'a> Headless<'a> {
    pub fn new(executor: Option<&'a mut dyn Executor>) -> Self {
        Headless {
            executor,
            exec_env: ExecutionEnv::default(),
            clip: None,
        }
    }
}

pub(crate) fn no_executor() -> ExecutionOutcome {
    let mut o = ExecutionOutcome::failed("no code executor configured\n", 127);
    o.note = Some(String::from("no executor"));
    o
}

impl Environment for Headless<'_> {
    fn label(&self) -> String {
        String::from("headless")
    }

    fn screenshot(&self) -> Option<Screenshot> {
        None
    }

    fn apply(&mut self, action: &UIAction) -> Result<StepReport, EnvError> {
        Ok(StepReport {
            changed: false,
            fault: Some(alloc::format!("no screen to apply {action}")),
        })
    }

    fn run_code(&mut self, code: &CodeArtifact) -> Result<ExecutionOutcome, CodexError> {
        match self.executor.as_mut() {
            Some(e) => e.execute(code, &self.exec_env),
            None => Ok(no_executor()),
        }
    }

    fn recording(&self) -> Option<VideoClip> {
        self.clip.clone()
    }

    fn snapshot(&self) -> Value {
        Value::Null
    }
}
