use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmac::cassette::{self, Tape};
use mmac::config::{self, BuildOptions};
use mmac::fixtures::{self, FixtureLibrary, Scenario};
use mmac::harness::{self, BackendSource, RunOptions, DEFAULT_BUDGET};
use mmac::sandbox::SandboxExecutor;
use mmac::{replay, store, Error};
use mmac_core::backend::{BackendConfig, Script};
use mmac_core::codex::ToolLibrary;
use mmac_core::orchestrator::{run_episode, Team, Trace};
use mmac_core::plan::UserRequest;
use mmac_core::protocol::AgentRole;
use mmac_core::scoring::{MatchMode, Pct};
use mmac_core::simenv::SimDesktop;

#[derive(Parser)]
#[command(name = "mmac", version, about = "Multi-agent desktop assistant runner and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one request against an app fixture.
    Run {
        request: String,
        #[arg(long)]
        fixture: String,
        /// Script for every role (bare script or a document with a `script` key).
        #[arg(long)]
        script: Option<PathBuf>,
        /// Trace output path.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a benchmark.
    #[command(subcommand)]
    Bench(Bench),
    /// Re-apply a recorded trace and check it reproduces.
    Replay {
        trace: PathBuf,
        #[arg(long, default_value = "fixtures")]
        fixtures: PathBuf,
    },
    /// Load and cross-check every shipped fixture.
    ValidateFixtures {
        #[arg(long, default_value = "fixtures")]
        fixtures: PathBuf,
    },
}

#[derive(Subcommand)]
enum Bench {
    /// Question answering from a JSON Lines task file.
    Gaia {
        taskfile: PathBuf,
        /// Byte-exact answer matching instead of trim and case-fold.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        bench: BenchFlags,
        #[command(flatten)]
        common: Common,
    },
    /// GUI tasks from a directory of task documents.
    Vibench {
        taskdir: PathBuf,
        #[command(flatten)]
        bench: BenchFlags,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct BenchFlags {
    /// JSON report output path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory for one trace per task.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Exit 1 when the average percentage falls below this.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendChoice {
    /// Canned responses shipped with the task or scenario.
    Scripted,
    /// Backends from `--config` (stock remote models without one).
    #[value(alias = "remote")]
    Config,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "config")]
    backend: BackendChoice,
    /// Backend configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "fixtures")]
    fixtures: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u32,
    /// Tool library file, loaded before and saved after.
    #[arg(long)]
    library: Option<PathBuf>,
    /// Record every model exchange to this cassette.
    #[arg(long)]
    record: Option<PathBuf>,
}

/// Exit status with a message for stderr.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(2, e.to_string())
    }
}

type CliResult = Result<ExitCode, Fail>;

struct Setup {
    source: BackendSource,
    tape: Option<Tape>,
    library: ToolLibrary,
}

impl Common {
    fn setup(&self) -> Result<Setup, Fail> {
        if self.budget == 0 {
            return Err(Fail(2, "--budget must be at least 1".into()));
        }
        let tape: Option<Tape> = self.record.as_ref().map(|_| Arc::new(Mutex::new(Vec::new())));
        let library = match &self.library {
            Some(p) => store::load_library(p)?,
            None => ToolLibrary::new(),
        };
        let source = match self.backend {
            BackendChoice::Scripted => BackendSource::Scripted {
                opts: BuildOptions {
                    tape: tape.clone(),
                    ..Default::default()
                },
            },
            BackendChoice::Config => {
                let (config, base_dir) = match &self.config {
                    Some(p) => (
                        config::load(p)?,
                        p.parent().map(Path::to_path_buf).unwrap_or_default(),
                    ),
                    None => (BackendConfig::default(), PathBuf::new()),
                };
                // Surface missing credentials and files before any task runs.
                config::build_backends(&config, &AgentRole::ALL, &BuildOptions { base_dir: base_dir.clone(), ..Default::default() })?;
                BackendSource::Config {
                    config,
                    opts: BuildOptions {
                        base_dir,
                        tape: tape.clone(),
                        ..Default::default()
                    },
                }
            }
        };
        Ok(Setup { source, tape, library })
    }

    fn finish(&self, setup: &Setup) -> Result<(), Fail> {
        if let (Some(p), Some(t)) = (&self.record, &setup.tape) {
            let entries = t.lock().unwrap_or_else(|e| e.into_inner());
            cassette::write(p, &entries)?;
        }
        if let Some(p) = &self.library {
            store::save_library(p, &setup.library)?;
        }
        Ok(())
    }
}

fn find_scenario(fixtures_root: &Path, request: &str, fixture: &str) -> Option<Scenario> {
    let dir = fixtures_root.join("scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir).ok()?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    files.sort();
    files
        .into_iter()
        .filter_map(|p| fixtures::load_scenario(&p).ok())
        .find(|s| s.request.trim() == request.trim() && s.fixture == fixture && s.script.is_some())
}

fn cmd_run(request: &str, fixture: &str, script: Option<&Path>, trace_path: Option<&Path>, common: &Common) -> CliResult {
    let lib = FixtureLibrary::load_dir(&fixtures::apps_dir(&common.fixtures))?;
    let app = lib.require(fixture)?.clone();
    let mut setup = common.setup()?;
    let script: Option<Script> = match (script, common.backend) {
        (Some(p), _) => Some(config::load_script(p)?),
        (None, BackendChoice::Scripted) => find_scenario(&common.fixtures, request, &app.name).and_then(|s| s.script),
        (None, BackendChoice::Config) => None,
    };
    let source = match (&setup.source, &script) {
        (BackendSource::Config { .. }, Some(_)) => BackendSource::Scripted {
            opts: BuildOptions {
                tape: setup.tape.clone(),
                ..Default::default()
            },
        },
        (s, _) => s.clone(),
    };
    let (backends, decoding) = source.backends(request, script.as_ref())?;
    let req = UserRequest::new(request).ok_or_else(|| Fail(2, "request is empty".into()))?;
    let mut team = Team::new(backends);
    team.decoding = decoding;
    team.library = setup.library.clone();
    let mut sandbox = SandboxExecutor::new();
    let mut desktop = SimDesktop::new(app).with_executor(&mut sandbox);
    let mut trace = Trace::new();
    let result = run_episode(&req, &mut team, &mut desktop, common.budget, &mut trace);
    drop(desktop);
    setup.library = team.library;
    let trace_path = trace_path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("trace.jsonl"));
    store::write_trace(&trace_path, &trace)?;
    common.finish(&setup)?;
    match result {
        Ok(r) => {
            println!(
                "outcome: {}  rounds: {}  trace: {}",
                if r.succeeded() { "success" } else { "failure (budget exhausted)" },
                r.rounds_used,
                trace_path.display()
            );
            if let Some(a) = &r.answer {
                println!("answer: {a}");
            }
            Ok(if r.succeeded() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Err(e) => Err(Fail(1, format!("episode failed: {e} (trace: {})", trace_path.display()))),
    }
}

fn below(avg: Pct, threshold: f64) -> bool {
    (avg.0 as f64) / 100.0 + 1e-9 < threshold
}

fn write_report(path: Option<&Path>, json: &serde_json::Value) -> Result<(), Fail> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(json).map_err(|e| Fail(2, e.to_string()))?;
        store::write_atomic(p, text.as_bytes())?;
    }
    Ok(())
}

fn run_opts(common: &Common, bench: &BenchFlags, mode: MatchMode) -> RunOptions {
    RunOptions {
        budget: common.budget,
        traces: bench.traces.clone(),
        mode,
    }
}

fn cmd_bench(b: &Bench) -> CliResult {
    match b {
        Bench::Gaia {
            taskfile,
            strict,
            bench,
            common,
        } => {
            let tasks = fixtures::load_gaia(taskfile)?;
            if tasks.is_empty() {
                return Err(Fail(2, format!("{}: no tasks", taskfile.display())));
            }
            let mut setup = common.setup()?;
            let mode = if *strict { MatchMode::Strict } else { MatchMode::Normalized };
            let report = harness::run_gaia(taskfile, &tasks, &setup.source, &mut setup.library, &run_opts(common, bench, mode))?;
            common.finish(&setup)?;
            print!("{}", harness::gaia_table(&report));
            write_report(bench.report.as_deref(), &harness::gaia_json(&report))?;
            Ok(if below(report.overall.pct(), bench.threshold) { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Bench::Vibench { taskdir, bench, common } => {
            let (tasks_dir, default_apps) = fixtures::vibench_dirs(taskdir);
            let apps = if common.fixtures.join("apps").is_dir() && !default_apps.is_dir() {
                fixtures::apps_dir(&common.fixtures)
            } else {
                default_apps
            };
            let lib = FixtureLibrary::load_dir(&apps)?;
            let tasks = fixtures::load_vibench(&tasks_dir)?;
            if tasks.is_empty() {
                return Err(Fail(2, format!("{}: no tasks", tasks_dir.display())));
            }
            let mut setup = common.setup()?;
            let report = harness::run_vibench(&tasks, &lib, &setup.source, &mut setup.library, &run_opts(common, bench, MatchMode::Normalized))?;
            common.finish(&setup)?;
            print!("{}", harness::vibench_table(&report));
            write_report(bench.report.as_deref(), &harness::vibench_json(&report))?;
            Ok(if below(report.average.pct(), bench.threshold) { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
    }
}

fn cmd_replay(trace: &Path, fixtures_root: &Path) -> CliResult {
    let t = store::read_trace(trace)?;
    let lib = FixtureLibrary::load_dir(&fixtures::apps_dir(fixtures_root))?;
    let rep = replay::replay(&t, &lib);
    println!(
        "env: {}  actions: {}  rounds: {}",
        rep.env,
        rep.actions,
        rep.rounds_used.map(|r| r.to_string()).unwrap_or_else(|| "-".into())
    );
    if rep.ok() {
        println!("replay matches");
        Ok(ExitCode::SUCCESS)
    } else {
        for p in &rep.problems {
            println!("mismatch: {p}");
        }
        Ok(ExitCode::from(1))
    }
}

fn cmd_validate(root: &Path) -> CliResult {
    let problems = fixtures::validate_root(root);
    if problems.is_empty() {
        println!("fixtures ok: {}", root.display());
        Ok(ExitCode::SUCCESS)
    } else {
        for p in &problems {
            eprintln!("{p}");
        }
        Err(Fail(2, format!("{} fixture problem(s)", problems.len())))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run {
            request,
            fixture,
            script,
            trace,
            common,
        } => cmd_run(request, fixture, script.as_deref(), trace.as_deref(), common),
        Command::Bench(b) => cmd_bench(b),
        Command::Replay { trace, fixtures } => cmd_replay(trace, fixtures),
        Command::ValidateFixtures { fixtures } => cmd_validate(fixtures),
    };
    match result {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            eprintln!("mmac: {msg}");
            ExitCode::from(code)
        }
    }
}
