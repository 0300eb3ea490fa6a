mod common;

use mmac::fixtures::load_codex_cases;
use mmac::sandbox::SandboxExecutor;
use mmac::store::{load_library, save_library};
use mmac_core::agents::PromptSet;
use mmac_core::backend::{Decoding, Script, ScriptedBackend};
use mmac_core::codex::{
    run_pipeline, task_signature, CodexEvent, ExecutionEnv, Executor, Fault, ToolLibrary, MAX_REFINE_CYCLES,
};
use mmac_core::protocol::AgentRole;
use serde_json::json;

fn env_for(timeout_ms: Option<u64>) -> ExecutionEnv {
    let env = ExecutionEnv::default();
    match timeout_ms {
        Some(ms) => env.with_timeout_ms(ms).unwrap(),
        None => env,
    }
}

#[test]
fn every_fault_case_is_repaired_in_the_sandbox() {
    let cases = load_codex_cases(&common::fixtures_root().join("codex")).unwrap();
    assert_eq!(cases.len(), 6);
    for (name, case) in cases {
        let env = env_for(case.timeout_ms);
        let mut sandbox = SandboxExecutor::new();
        let mut backend = ScriptedBackend::new(case.script.clone());
        let mut library = ToolLibrary::new();
        let run = run_pipeline(
            &case.task,
            "",
            &mut library,
            |code| sandbox.execute(code, &env),
            &mut backend,
            &PromptSet::builtin(),
            Decoding::default(),
        )
        .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(run.accomplished(), "{name}: {:?}", run.evaluation);
        assert!(run.cycles <= MAX_REFINE_CYCLES, "{name}: {} cycles", run.cycles);
        assert_eq!(run.outcome.stdout.trim_end(), case.expected_stdout, "{name}");
        assert_eq!(run.outcome.fault, Fault::None, "{name}");

        let first = run
            .events
            .iter()
            .find_map(|e| match e {
                CodexEvent::Outcome { outcome, .. } => Some(outcome),
                _ => None,
            })
            .unwrap();
        assert!(!first.is_clean(), "{name}: first run should fail");
        let class = run
            .events
            .iter()
            .find_map(|e| match e {
                CodexEvent::Analysis { analysis, .. } => Some(analysis.class),
                _ => None,
            })
            .unwrap();
        assert_eq!(class.as_str(), case.fault, "{name}");
        assert!(library.get(&task_signature(&case.task)).is_some(), "{name}: not retained");
    }
}

#[test]
fn retained_tool_is_reused_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("library.json");
    let task = "Print the sum of 2 and 3";
    let script = Script::new()
        .with(AgentRole::Programmer, json!({"code": "print(2 + 3)\n", "dialect": "python"}))
        .with(AgentRole::Programmer, json!({"judge": "accomplished", "score": 9, "rationale": "ok"}));
    let env = ExecutionEnv::default();
    let mut sandbox = SandboxExecutor::new();
    let mut library = load_library(&path).unwrap();
    let run = run_pipeline(
        task,
        "",
        &mut library,
        |c| sandbox.execute(c, &env),
        &mut ScriptedBackend::new(script),
        &PromptSet::builtin(),
        Decoding::default(),
    )
    .unwrap();
    assert!(run.retained && !run.from_library);
    save_library(&path, &library).unwrap();

    let mut reloaded = load_library(&path).unwrap();
    let again = Script::new().with(AgentRole::Programmer, json!({"judge": "accomplished", "score": 9, "rationale": "ok"}));
    let mut backend = ScriptedBackend::new(again);
    let run = run_pipeline(
        task,
        "",
        &mut reloaded,
        |c| sandbox.execute(c, &env),
        &mut backend,
        &PromptSet::builtin(),
        Decoding::default(),
    )
    .unwrap();
    assert!(run.from_library);
    assert_eq!(run.outcome.stdout, "5\n");
    assert_eq!(backend.calls(AgentRole::Programmer), 1);
}
