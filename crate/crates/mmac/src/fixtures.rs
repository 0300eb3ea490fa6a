//! Loaders for app fixtures, benchmark task files and scenarios.
//!
//! The fixtures root looks like:
//!
//! ```text
//! apps/<fixture>.json
//! vibench/<task>.json
//! scenarios/<name>.json
//! gaia/<tasks>.jsonl, gaia/scripts/<id>.json, gaia/files/...
//! codex/<case>.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use mmac_core::backend::Script;
use mmac_core::codex::Dialect;
use mmac_core::scoring::{GaiaTask, VibTask};
use mmac_core::simenv::{AppFixture, GoalPredicate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// The app fixtures directory under a fixtures root, or the directory
/// itself when it holds fixtures directly.
pub fn apps_dir(root: &Path) -> PathBuf {
    let apps = root.join("apps");
    if apps.is_dir() {
        apps
    } else {
        root.to_path_buf()
    }
}

/// Every app fixture in a directory, keyed by fixture name.
#[derive(Debug, Clone, Default)]
pub struct FixtureLibrary {
    apps: BTreeMap<String, AppFixture>,
}

impl FixtureLibrary {
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut apps = BTreeMap::new();
        for p in json_files(dir)? {
            let f = AppFixture::from_json(&read(&p)?).map_err(|e| Error::format(&p, e))?;
            if apps.contains_key(&f.name) {
                return Err(Error::format(&p, format!("duplicate fixture name `{}`", f.name)));
            }
            apps.insert(f.name.clone(), f);
        }
        Ok(FixtureLibrary { apps })
    }

    pub fn len(&self) -> usize {
        self.apps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AppFixture> {
        self.apps.values()
    }

    /// By fixture name, falling back to app display names and aliases.
    pub fn get(&self, name: &str) -> Option<&AppFixture> {
        self.apps
            .get(name)
            .or_else(|| self.apps.values().find(|f| f.matches_app(name)))
    }

    pub fn require(&self, name: &str) -> Result<&AppFixture> {
        self.get(name).ok_or_else(|| Error::FixtureMissing(name.to_string()))
    }

    pub fn require_goal(&self, fixture: &str, goal: &str) -> Result<(&AppFixture, &GoalPredicate)> {
        let f = self.require(fixture)?;
        let g = f.goal(goal).ok_or_else(|| Error::GoalMissing {
            fixture: fixture.to_string(),
            goal: goal.to_string(),
        })?;
        Ok((f, g))
    }
}

/// A benchmark task document, optionally carrying the script that drives
/// its agents offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VibTaskDoc {
    #[serde(flatten)]
    pub task: VibTask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Script>,
}

/// Task directory and app directory for a `bench vibench` argument, which
/// may be a fixtures root or the task directory itself.
pub fn vibench_dirs(path: &Path) -> (PathBuf, PathBuf) {
    let nested = path.join("vibench");
    if nested.is_dir() {
        return (nested, apps_dir(path));
    }
    let parent = path.parent().map(Path::to_path_buf).unwrap_or_default();
    (path.to_path_buf(), apps_dir(&parent))
}

/// Task documents sorted by id. Ids must be unique.
pub fn load_vibench(dir: &Path) -> Result<Vec<VibTaskDoc>> {
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for p in json_files(dir)? {
        let d: VibTaskDoc = serde_json::from_str(&read(&p)?).map_err(|e| Error::format(&p, e))?;
        if !seen.insert(d.task.id.clone()) {
            return Err(Error::format(&p, format!("duplicate task id `{}`", d.task.id)));
        }
        docs.push(d);
    }
    docs.sort_by(|a, b| a.task.id.cmp(&b.task.id));
    Ok(docs)
}

/// A single scripted request against one fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub request: String,
    pub fixture: String,
    pub goal: String,
    #[serde(default)]
    pub script: Option<Script>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::format(path, e))
}

/// Question-answering tasks, one JSON object per line. Blank lines are
/// skipped; every task is validated and ids must be unique.
pub fn load_gaia(path: &Path) -> Result<Vec<GaiaTask>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in read(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |d: String| Error::format(path, format!("line {}: {d}", i + 1));
        let t: GaiaTask = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        t.validate().map_err(at)?;
        if !seen.insert(t.id.clone()) {
            return Err(at(format!("duplicate task id `{}`", t.id)));
        }
        out.push(t);
    }
    Ok(out)
}

/// `scripts/<id>.json` next to the task file, if present.
pub fn gaia_script(taskfile: &Path, id: &str) -> Option<PathBuf> {
    let p = taskfile.parent()?.join("scripts").join(format!("{id}.json"));
    p.is_file().then_some(p)
}

/// Attachment paths resolved against the task file's directory.
pub fn gaia_attachments(taskfile: &Path, task: &GaiaTask) -> Result<Vec<PathBuf>> {
    let base = taskfile.parent().unwrap_or(Path::new("."));
    task.attachments
        .iter()
        .map(|a| {
            let p = base.join(a);
            if p.is_file() {
                Ok(p)
            } else {
                Err(Error::format(taskfile, format!("task {}: attachment {a} not found", task.id)))
            }
        })
        .collect()
}

/// A code-pipeline case: a task, the kind of fault the first attempt hits,
/// and the output the repaired code should print.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodexCase {
    pub task: String,
    pub dialect: String,
    pub fault: String,
    pub expected_stdout: String,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
    pub script: Script,
}

impl CodexCase {
    pub fn dialect(&self) -> Option<Dialect> {
        Dialect::from_name(&self.dialect)
    }
}

pub fn load_codex_cases(dir: &Path) -> Result<Vec<(String, CodexCase)>> {
    let mut out = Vec::new();
    for p in json_files(dir)? {
        let c: CodexCase = serde_json::from_str(&read(&p)?).map_err(|e| Error::format(&p, e))?;
        if c.dialect().is_none() {
            return Err(Error::format(&p, format!("unknown dialect `{}`", c.dialect)));
        }
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.push((name, c));
    }
    Ok(out)
}

/// Problems found by a full fixture check; empty means everything loads.
pub fn validate_root(root: &Path) -> Vec<String> {
    let mut problems = Vec::new();
    let lib = match FixtureLibrary::load_dir(&apps_dir(root)) {
        Ok(l) => l,
        Err(e) => return vec![e.to_string()],
    };
    if lib.is_empty() {
        problems.push(format!("{}: no app fixtures", apps_dir(root).display()));
    }
    let vib = root.join("vibench");
    if vib.is_dir() {
        match load_vibench(&vib) {
            Ok(docs) => {
                for d in docs {
                    if let Err(e) = lib.require_goal(&d.task.fixture, &d.task.goal) {
                        problems.push(format!("task {}: {e}", d.task.id));
                    }
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    let scen = root.join("scenarios");
    if scen.is_dir() {
        match json_files(&scen) {
            Ok(files) => {
                for p in files {
                    match load_scenario(&p) {
                        Ok(s) => {
                            if let Err(e) = lib.require_goal(&s.fixture, &s.goal) {
                                problems.push(format!("{}: {e}", p.display()));
                            }
                        }
                        Err(e) => problems.push(e.to_string()),
                    }
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    let gaia = root.join("gaia");
    if gaia.is_dir() {
        if let Ok(entries) = fs::read_dir(&gaia) {
            let mut files: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            files.sort();
            for f in files {
                match load_gaia(&f) {
                    Ok(tasks) => {
                        for t in &tasks {
                            if let Err(e) = gaia_attachments(&f, t) {
                                problems.push(e.to_string());
                            }
                        }
                    }
                    Err(e) => problems.push(e.to_string()),
                }
            }
        }
    }
    let codex = root.join("codex");
    if codex.is_dir() {
        if let Err(e) = load_codex_cases(&codex) {
            problems.push(e.to_string());
        }
    }
    problems
}
