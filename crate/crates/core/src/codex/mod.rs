//! The Programmer's code pipeline: initial code, error analysis, refinement,
//! sandboxed execution, evaluation against the task, and score-based
//! retention in a tool library.

mod analysis;
mod library;
mod pipeline;

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::agents::AgentError;

pub use analysis::{analyze_errors, classify, ErrorAnalysis, FailureClass};
pub use library::{retain, LibraryEntry, ToolLibrary, RETENTION_THRESHOLD};
pub use pipeline::{
    evaluate, generate, refine, run_pipeline, task_signature, CodexEvent, PipelineRun,
    MAX_REFINE_CYCLES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    /// POSIX shell.
    Shell,
    /// General-purpose script (Python).
    Script,
}

impl Dialect {
    /// Lenient decoding of a model-supplied dialect name.
    pub fn from_name(name: &str) -> Option<Dialect> {
        let n = name.trim().to_ascii_lowercase();
        match n.as_str() {
            "shell" | "sh" | "bash" | "zsh" => Some(Dialect::Shell),
            "script" | "python" | "python3" | "py" => Some(Dialect::Script),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Init,
    Mod,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeArtifact {
    pub source: String,
    pub dialect: Dialect,
    pub stage: Stage,
    pub task_signature: String,
    /// 0 for the initial artifact, incremented by each refinement.
    pub revision: u32,
}

impl CodeArtifact {
    /// Returns `None` for empty source.
    pub fn init(source: impl Into<String>, dialect: Dialect, task: &str) -> Option<Self> {
        let source = source.into();
        if source.trim().is_empty() {
            return None;
        }
        Some(CodeArtifact {
            source,
            dialect,
            stage: Stage::Init,
            task_signature: task_signature(task),
            revision: 0,
        })
    }
}

/// Limits for one sandboxed run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionEnv {
    /// Fresh directory when `None`.
    pub working_dir: Option<String>,
    pub env_vars: BTreeMap<String, String>,
    timeout_ms: u64,
    pub network: bool,
    pub max_output_bytes: usize,
    pub cpu_seconds: Option<u64>,
    pub max_file_bytes: Option<u64>,
}

impl Default for ExecutionEnv {
    fn default() -> Self {
        ExecutionEnv {
            working_dir: None,
            env_vars: BTreeMap::new(),
            timeout_ms: 30_000,
            network: false,
            max_output_bytes: 1 << 20,
            cpu_seconds: None,
            max_file_bytes: Some(64 << 20),
        }
    }
}

impl ExecutionEnv {
    /// `None` for a zero timeout.
    pub fn with_timeout_ms(mut self, ms: u64) -> Option<Self> {
        if ms == 0 {
            return None;
        }
        self.timeout_ms = ms;
        Some(self)
    }

    pub fn timeout_ms(&self) -> u64 {
        self.timeout_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fault {
    None,
    Timeout,
    Crash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub stdout: String,
    pub stderr: String,
    /// `None` when the process was killed (timeout, signal).
    pub exit_status: Option<i32>,
    pub fault: Fault,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ExecutionOutcome {
    pub fn ok(stdout: impl Into<String>) -> Self {
        ExecutionOutcome {
            stdout: stdout.into(),
            stderr: String::new(),
            exit_status: Some(0),
            fault: Fault::None,
            note: None,
        }
    }

    pub fn failed(stderr: impl Into<String>, exit: i32) -> Self {
        ExecutionOutcome {
            stdout: String::new(),
            stderr: stderr.into(),
            exit_status: Some(exit),
            fault: Fault::None,
            note: None,
        }
    }

    pub fn timeout() -> Self {
        ExecutionOutcome {
            stdout: String::new(),
            stderr: String::new(),
            exit_status: None,
            fault: Fault::Timeout,
            note: None,
        }
    }

    /// Clean exit with status 0.
    pub fn is_clean(&self) -> bool {
        self.fault == Fault::None && self.exit_status == Some(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judge {
    Accomplished,
    NotAccomplished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub judge: Judge,
    /// 0..=10
    pub score: u8,
    pub rationale: String,
    /// The backend's score was outside 0..=10 and got clamped.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub score_clamped: bool,
}

impl Evaluation {
    pub fn accomplished(&self) -> bool {
        self.judge == Judge::Accomplished
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodexError {
    #[error("sandbox unavailable: {0}")]
    SandboxUnavailable(String),
    #[error("outcome is clean; nothing to analyze")]
    CleanOutcome,
    #[error("refinement made no progress: {0}")]
    RefinementFailure(String),
    #[error("backend produced no code")]
    NoCode,
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Runs code artifacts.
pub trait Executor {
    fn execute(&mut self, code: &CodeArtifact, env: &ExecutionEnv) -> Result<ExecutionOutcome, CodexError>;
}

impl<E: Executor + ?Sized> Executor for alloc::boxed::Box<E> {
    fn execute(&mut self, code: &CodeArtifact, env: &ExecutionEnv) -> Result<ExecutionOutcome, CodexError> {
        (**self).execute(code, env)
    }
}
