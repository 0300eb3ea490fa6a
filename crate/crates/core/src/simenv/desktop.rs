use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::Value;

use super::fixture::AppFixture;
use super::state::{render, step, SimState, Screenshot, StepReport};
use super::video::VideoClip;
use crate::action::UIAction;
use crate::codex::{CodeArtifact, CodexError, Dialect, ExecutionEnv, ExecutionOutcome, Executor};
use crate::env::{no_executor, EnvError, Environment};

/// Milliseconds between recorded frames.
const FRAME_INTERVAL: u64 = 1000;

const LAUNCH_VERBS: &[&str] = &["open", "start", "xdg-open", "launch", "gtk-launch"];

/// A fixture-backed desktop. Every applied action is recorded as a video
/// frame; launch commands in code are turned into launch actions.
pub struct SimDesktop<'a> {
    fixture: AppFixture,
    state: SimState,
    clip: VideoClip,
    clock: u64,
    applied: Vec<(UIAction, StepReport)>,
    executor: Option<&'a mut dyn Executor>,
    pub exec_env: ExecutionEnv,
}

impl<'a> SimDesktop<'a> {
    pub fn new(fixture: AppFixture) -> Self {
        let state = SimState::initial(&fixture);
        let mut clip = VideoClip::default();
        clip.push(0, render(&fixture, &state));
        SimDesktop {
            fixture,
            state,
            clip,
            clock: 0,
            applied: Vec::new(),
            executor: None,
            exec_env: ExecutionEnv::default(),
        }
    }

    pub fn with_executor(mut self, executor: &'a mut dyn Executor) -> Self {
        self.executor = Some(executor);
        self
    }

    pub fn fixture(&self) -> &AppFixture {
        &self.fixture
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    fn apply_inner(&mut self, action: &UIAction) -> StepReport {
        let (next, report) = step(&self.fixture, &self.state, action);
        self.state = next;
        if report.changed {
            self.clock += FRAME_INTERVAL;
            self.clip.push(self.clock, render(&self.fixture, &self.state));
        }
        self.applied.push((action.clone(), report.clone()));
        report
    }
}

fn tokens(line: &str) -> Vec<String> {
    line.split(|c: char| c.is_whitespace() || "[](),;\"'`".contains(c))
        .filter(|t| !t.is_empty())
        .map(ToString::to_string)
        .collect()
}

fn app_after_verb(toks: &[String]) -> Option<String> {
    let rest: Vec<&str> = toks
        .iter()
        .map(String::as_str)
        .skip_while(|t| t.starts_with('-'))
        .take_while(|t| !matches!(*t, "&" | "&&" | "|" | "||" | ">" | "2>&1" | "shell=True" | "check=True"))
        .filter(|t| !t.starts_with('-'))
        .collect();
    (!rest.is_empty()).then(|| rest.join(" "))
}

/// Application named by a launch command in `code`, if any.
pub fn launch_target(code: &CodeArtifact) -> Option<String> {
    for line in code.source.lines() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        let toks = tokens(line);
        let verb_at = match code.dialect {
            Dialect::Shell => toks
                .first()
                .filter(|t| LAUNCH_VERBS.contains(&t.as_str()))
                .map(|_| 0),
            Dialect::Script => {
                let calls_out = ["system", "subprocess", "Popen", "call", "run"]
                    .iter()
                    .any(|m| line.contains(m));
                if !calls_out {
                    continue;
                }
                toks.iter().position(|t| LAUNCH_VERBS.contains(&t.as_str()))
            }
        };
        if let Some(i) = verb_at {
            if let Some(app) = app_after_verb(&toks[i + 1..]) {
                return Some(app);
            }
        }
    }
    None
}

impl Environment for SimDesktop<'_> {
    fn label(&self) -> String {
        self.fixture.name.clone()
    }

    fn screenshot(&self) -> Option<Screenshot> {
        Some(render(&self.fixture, &self.state))
    }

    fn apply(&mut self, action: &UIAction) -> Result<StepReport, EnvError> {
        Ok(self.apply_inner(action))
    }

    fn run_code(&mut self, code: &CodeArtifact) -> Result<ExecutionOutcome, CodexError> {
        if let Some(app) = launch_target(code) {
            if !self.fixture.matches_app(&app) {
                return Ok(ExecutionOutcome::failed(
                    format!("Unable to find application named '{app}'\n"),
                    1,
                ));
            }
            let report = self.apply_inner(&UIAction::launch(app.clone()));
            return Ok(match report.fault {
                None => ExecutionOutcome::ok(format!("launched {app}\n")),
                Some(f) => ExecutionOutcome::failed(format!("{f}\n"), 1),
            });
        }
        match self.executor.as_mut() {
            Some(e) => e.execute(code, &self.exec_env),
            None => Ok(no_executor()),
        }
    }

    fn recording(&self) -> Option<VideoClip> {
        Some(self.clip.clone())
    }

    fn snapshot(&self) -> Value {
        serde_json::to_value(&self.state).unwrap_or(Value::Null)
    }

    fn drain_applied(&mut self) -> Vec<(UIAction, StepReport)> {
        core::mem::take(&mut self.applied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(src: &str) -> CodeArtifact {
        CodeArtifact::init(src, Dialect::Shell, "t").unwrap()
    }

    #[test]
    fn launch_commands_recognized() {
        assert_eq!(launch_target(&sh("open -a Spotify")).as_deref(), Some("Spotify"));
        assert_eq!(launch_target(&sh("open -a \"Tencent Meeting\" &")).as_deref(), Some("Tencent Meeting"));
        assert_eq!(launch_target(&sh("#!/bin/sh\nxdg-open discord\n")).as_deref(), Some("discord"));
        let py = CodeArtifact::init("import subprocess\nsubprocess.run([\"open\", \"-a\", \"Steam\"])", Dialect::Script, "t").unwrap();
        assert_eq!(launch_target(&py).as_deref(), Some("Steam"));
        let reading = CodeArtifact::init("with open('f.txt') as f:\n    print(f.read())", Dialect::Script, "t").unwrap();
        assert_eq!(launch_target(&reading), None);
        assert_eq!(launch_target(&sh("echo open")), None);
    }
}
