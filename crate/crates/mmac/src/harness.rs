//! Benchmark runners and report rendering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mmac_core::backend::{BackendConfig, Decoding, RoleBackends, Script};
use mmac_core::codex::ToolLibrary;
use mmac_core::orchestrator::{run_episode, EpisodeResult, Team, Trace};
use mmac_core::plan::UserRequest;
use mmac_core::protocol::AgentRole;
use mmac_core::scoring::{
    score_exact, Category, GaiaItem, GaiaReport, GaiaTask, MatchMode, Tally, VibItem, VibReport,
};
use mmac_core::simenv::{check_goal, SimDesktop};
use mmac_core::env::Headless;
use serde_json::{json, Map, Value};

use crate::config::{self, BuildOptions};
use crate::error::{Error, Result};
use crate::fixtures::{self, FixtureLibrary, VibTaskDoc};
use crate::sandbox::SandboxExecutor;
use crate::store;

/// Default round budget for an episode.
pub const DEFAULT_BUDGET: u32 = 30;

/// Where an episode's model responses come from.
#[derive(Debug, Clone)]
pub enum BackendSource {
    /// The script shipped with each task.
    Scripted { opts: BuildOptions },
    /// A backend configuration file.
    Config { config: BackendConfig, opts: BuildOptions },
}

impl BackendSource {
    pub fn scripted() -> Self {
        BackendSource::Scripted {
            opts: BuildOptions::default(),
        }
    }

    /// Fresh backends for one episode. `script` is the task's own script,
    /// required in scripted mode.
    pub fn backends(&self, task: &str, script: Option<&Script>) -> Result<(RoleBackends<'static>, Decoding)> {
        match self {
            BackendSource::Scripted { opts } => {
                let s = script.ok_or_else(|| Error::NoScript(format!("task {task} ships no script")))?;
                Ok((config::scripted_backends(s, opts.tape.as_ref()), Decoding::default()))
            }
            BackendSource::Config { config, opts } => config::build_backends(config, &AgentRole::ALL, opts),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub budget: u32,
    /// One `<task id>.jsonl` trace per task goes here when set.
    pub traces: Option<PathBuf>,
    pub mode: MatchMode,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            budget: DEFAULT_BUDGET,
            traces: None,
            mode: MatchMode::Normalized,
        }
    }
}

fn rounds_in(trace: &Trace) -> u32 {
    trace.records().iter().filter_map(|r| r.round()).max().unwrap_or(0)
}

fn save_trace(opts: &RunOptions, id: &str, trace: &Trace) -> Result<()> {
    match &opts.traces {
        Some(dir) => store::write_trace(&dir.join(format!("{id}.jsonl")), trace),
        None => Ok(()),
    }
}

/// Runs every task against its fixture. A task succeeds only when the
/// episode ends in success and the goal predicate holds on the final state.
/// All fixtures and goals are checked before the first episode starts.
pub fn run_vibench(
    tasks: &[VibTaskDoc],
    lib: &FixtureLibrary,
    source: &BackendSource,
    library: &mut ToolLibrary,
    opts: &RunOptions,
) -> Result<VibReport> {
    for d in tasks {
        lib.require_goal(&d.task.fixture, &d.task.goal)?;
    }
    let mut items = Vec::with_capacity(tasks.len());
    for d in tasks {
        let t = &d.task;
        let (fixture, goal) = lib.require_goal(&t.fixture, &t.goal)?;
        let (backends, decoding) = source.backends(&t.id, d.script.as_ref())?;
        let mut team = Team::new(backends);
        team.decoding = decoding;
        team.library = library.clone();
        let mut sandbox = SandboxExecutor::new();
        let mut desktop = SimDesktop::new(fixture.clone()).with_executor(&mut sandbox);
        let mut trace = Trace::new();
        let request = UserRequest::new(t.request.clone())
            .ok_or_else(|| Error::Invalid(format!("task {}: empty request", t.id)))?;
        let result = run_episode(&request, &mut team, &mut desktop, opts.budget, &mut trace);
        let item = match result {
            Ok(r) => {
                let reached = check_goal(desktop.fixture(), desktop.state(), goal);
                VibItem {
                    id: t.id.clone(),
                    category: t.category,
                    success: r.succeeded() && reached,
                    rounds_used: r.rounds_used,
                    error: None,
                }
            }
            Err(e) => VibItem {
                id: t.id.clone(),
                category: t.category,
                success: false,
                rounds_used: rounds_in(&trace),
                error: Some(e.to_string()),
            },
        };
        *library = team.library;
        save_trace(opts, &t.id, &trace)?;
        items.push(item);
    }
    Ok(VibReport::from_items(items))
}

/// Answers every question headlessly. Attachments are copied into each
/// sandbox run's working directory.
pub fn run_gaia(
    taskfile: &Path,
    tasks: &[GaiaTask],
    source: &BackendSource,
    library: &mut ToolLibrary,
    opts: &RunOptions,
) -> Result<GaiaReport> {
    let mut items = Vec::with_capacity(tasks.len());
    for t in tasks {
        let attachments = fixtures::gaia_attachments(taskfile, t)?;
        let script = match (source, fixtures::gaia_script(taskfile, &t.id)) {
            (BackendSource::Scripted { .. }, Some(p)) => Some(config::load_script(&p)?),
            _ => None,
        };
        let (backends, decoding) = source.backends(&t.id, script.as_ref())?;
        let mut team = Team::new(backends);
        team.decoding = decoding;
        team.library = library.clone();
        let mut sandbox = SandboxExecutor::new().with_inputs(attachments.iter().cloned());
        let mut env = Headless::new(Some(&mut sandbox));
        let mut request = UserRequest::new(t.question.clone())
            .ok_or_else(|| Error::Invalid(format!("task {}: empty question", t.id)))?;
        request.attachments = attachments
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let mut trace = Trace::new();
        let result = run_episode(&request, &mut team, &mut env, opts.budget, &mut trace);
        let item = gaia_item(t, result, opts.mode);
        *library = team.library;
        save_trace(opts, &t.id, &trace)?;
        items.push(item);
    }
    Ok(GaiaReport::from_items(items))
}

fn gaia_item(
    t: &GaiaTask,
    result: std::result::Result<EpisodeResult, mmac_core::orchestrator::EpisodeError>,
    mode: MatchMode,
) -> GaiaItem {
    match result {
        Ok(r) => {
            let done = r.succeeded();
            let answer = r.answer;
            let (correct, note) = match (&answer, done) {
                (Some(a), true) => {
                    let s = score_exact(a, &t.ground_truth, mode);
                    (s.correct, s.note)
                }
                (Some(_), false) => (false, Some("episode did not finish".to_string())),
                (None, _) => (false, Some("no answer".to_string())),
            };
            GaiaItem {
                id: t.id.clone(),
                level: t.level,
                answer,
                correct,
                note,
            }
        }
        Err(e) => GaiaItem {
            id: t.id.clone(),
            level: t.level,
            answer: None,
            correct: false,
            note: Some(e.to_string()),
        },
    }
}

fn tally_json(t: &Tally) -> Value {
    json!({"correct": t.correct, "total": t.total, "pct": t.pct().to_string()})
}

pub fn vibench_json(r: &VibReport) -> Value {
    let mut per = Map::new();
    for c in Category::ALL {
        per.insert(c.as_str().into(), tally_json(&r.per_category.get(&c).copied().unwrap_or_default()));
    }
    json!({
        "benchmark": "vibench",
        "per_category": per,
        "average": tally_json(&r.average),
        "items": r.items,
    })
}

pub fn gaia_json(r: &GaiaReport) -> Value {
    let mut per = Map::new();
    for l in 1u8..=3 {
        per.insert(format!("level{l}"), tally_json(&r.per_level.get(&l).copied().unwrap_or_default()));
    }
    json!({
        "benchmark": "gaia",
        "per_level": per,
        "average": tally_json(&r.overall),
        "items": r.items,
    })
}

/// Aligned text table: a header row and one row of percentages, each
/// column as wide as its widest cell.
pub fn table(headers: &[&str], cells: &[String]) -> String {
    let widths: Vec<usize> = headers
        .iter()
        .zip(cells)
        .map(|(h, c)| h.len().max(c.len()))
        .collect();
    let mut out = String::new();
    let row = |out: &mut String, vals: &mut dyn Iterator<Item = &str>| {
        let line: Vec<String> = vals.zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    };
    row(&mut out, &mut headers.iter().copied());
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    row(&mut out, &mut cells.iter().map(String::as_str));
    out
}

pub fn vibench_table(r: &VibReport) -> String {
    let mut cells: Vec<String> = Category::ALL
        .iter()
        .map(|c| r.per_category.get(c).copied().unwrap_or_default().pct().to_string())
        .collect();
    cells.push(r.average.pct().to_string());
    table(&["3D", "Recreation", "Office", "Average"], &cells)
}

pub fn gaia_table(r: &GaiaReport) -> String {
    let mut cells: Vec<String> = (1u8..=3)
        .map(|l| r.per_level.get(&l).copied().unwrap_or_default().pct().to_string())
        .collect();
    cells.push(r.overall.pct().to_string());
    table(&["Level 1", "Level 2", "Level 3", "Average"], &cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_columns_align() {
        let t = table(&["3D", "Recreation", "Office", "Average"], &["46.15".into(), "62.50".into(), "77.78".into(), "60.00".into()]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "   3D  Recreation  Office  Average");
        assert_eq!(lines[2], "46.15       62.50   77.78    60.00");
    }
}
