mod common;

use std::sync::{Arc, Mutex};

use mmac::cassette::{self, secrets_from_env, RecordingBackend, Tape, REDACTED};
use mmac::config::{self, scripted_backends, BuildOptions};
use mmac::fixtures::{apps_dir, load_scenario, FixtureLibrary};
use mmac_core::backend::{CompletionBackend, CompletionRequest, ReplayBackend, Script, ScriptedBackend};
use mmac_core::orchestrator::{run_episode, Team, Trace};
use mmac_core::plan::UserRequest;
use mmac_core::protocol::AgentRole;
use mmac_core::simenv::SimDesktop;

const SECRET_VAR: &str = "MMAC_CASSETTE_TEST_API_KEY";
const SECRET: &str = "sk-live-7f3a9c0e55b1";

#[test]
fn recorded_cassettes_never_hold_credentials() {
    std::env::set_var(SECRET_VAR, SECRET);
    let secrets = secrets_from_env(&[]);
    assert!(secrets.iter().any(|s| s == SECRET));

    // A provider that echoes the key back, the worst case for a recorder.
    let script = Script::new()
        .with(AgentRole::Planner, format!("plan with {SECRET}"))
        .with(AgentRole::Planner, "second")
        .with(AgentRole::Planner, format!("{SECRET}{SECRET}"))
        .with(AgentRole::Planner, "again");
    let tape: Tape = Arc::new(Mutex::new(Vec::new()));
    let mut b = RecordingBackend::new(ScriptedBackend::new(script), tape.clone(), secrets);
    for prompt in ["a", "b", "c", "a"] {
        b.complete(&CompletionRequest::new(AgentRole::Planner, prompt)).unwrap();
    }
    let entries = tape.lock().unwrap().clone();
    assert_eq!(entries.len(), 4);
    let mut digests: Vec<&str> = entries.iter().map(|e| e.digest.as_str()).collect();
    assert_eq!(digests[0], digests[3]);
    digests.sort();
    digests.dedup();
    assert_eq!(digests.len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cassette.jsonl");
    cassette::write(&path, &entries).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains(SECRET));
    assert!(text.contains(REDACTED));
    assert_eq!(text.lines().count(), 4);

    // Repeated digests replay in recorded order.
    let mut replay = ReplayBackend::new(cassette::read(&path).unwrap());
    let a = CompletionRequest::new(AgentRole::Planner, "a");
    assert_eq!(replay.complete(&a).unwrap().text, format!("plan with {REDACTED}"));
    assert_eq!(replay.complete(&a).unwrap().text, "again");
    assert!(replay.complete(&a).is_err());
}

#[test]
fn read_reports_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"digest\":\"d\",\"role\":\"Planner\",\"response_text\":\"x\"}\nnot json\n").unwrap();
    let err = cassette::read(&path).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}

fn episode(backends: mmac_core::backend::RoleBackends<'static>, lib: &FixtureLibrary, fixture: &str, request: &str) -> Trace {
    let mut team = Team::new(backends);
    let mut desktop = SimDesktop::new(lib.require(fixture).unwrap().clone());
    let mut trace = Trace::new();
    run_episode(&UserRequest::new(request).unwrap(), &mut team, &mut desktop, 30, &mut trace).unwrap();
    trace
}

#[test]
fn recorded_episode_replays_identically() {
    let lib = FixtureLibrary::load_dir(&apps_dir(&common::fixtures_root())).unwrap();
    let sc = load_scenario(&common::fixtures_root().join("scenarios/spotify.json")).unwrap();
    let tape: Tape = Arc::new(Mutex::new(Vec::new()));
    let recorded = episode(scripted_backends(sc.script.as_ref().unwrap(), Some(&tape)), &lib, &sc.fixture, &sc.request);

    let dir = tempfile::tempdir().unwrap();
    cassette::write(&dir.path().join("episode.jsonl"), &tape.lock().unwrap()).unwrap();
    let cfg = config::parse("[default]\nkind = \"replay\"\ncassette = \"episode.jsonl\"\n", &dir.path().join("b.toml")).unwrap();
    let opts = BuildOptions {
        base_dir: dir.path().to_path_buf(),
        ..BuildOptions::default()
    };
    let (backends, _) = config::build_backends(&cfg, &AgentRole::ALL, &opts).unwrap();
    let replayed = episode(backends, &lib, &sc.fixture, &sc.request);
    assert_eq!(recorded.to_jsonl(), replayed.to_jsonl());
}
