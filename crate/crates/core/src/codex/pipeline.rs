use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::analysis::{dialect_name, exit_text, fault_name};
use super::{
    analyze_errors, retain, CodeArtifact, CodexError, Dialect, ErrorAnalysis, Evaluation,
    ExecutionOutcome, Fault, Judge, Stage, ToolLibrary,
};
use crate::agents::{consult_object, AgentError, PromptSet};
use crate::backend::{CompletionBackend, CompletionRequest, Decoding};
use crate::protocol::{value_text, AgentRole};

/// Refinement cycles allowed after the first execution.
pub const MAX_REFINE_CYCLES: u32 = 3;

/// Library key for a task: lowercase alphanumeric words joined by spaces.
pub fn task_signature(task: &str) -> String {
    task.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// One step of the pipeline, as recorded in traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CodexEvent {
    LibraryHit { task_signature: String },
    Artifact { artifact: CodeArtifact },
    Outcome { revision: u32, outcome: ExecutionOutcome },
    Evaluation { revision: u32, evaluation: Evaluation },
    Analysis { revision: u32, analysis: ErrorAnalysis },
    Retained { task_signature: String, score: u8 },
    Stopped { revision: u32, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineRun {
    pub code: CodeArtifact,
    pub outcome: ExecutionOutcome,
    pub evaluation: Evaluation,
    pub events: Vec<CodexEvent>,
    pub cycles: u32,
    pub retained: bool,
    pub from_library: bool,
}

impl PipelineRun {
    pub fn accomplished(&self) -> bool {
        self.evaluation.accomplished()
    }
}

fn strip_fences(code: &str) -> String {
    let t = code.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = rest.split_once('\n').map(|x| x.1).unwrap_or("");
        let body = body.trim_end();
        let body = body.strip_suffix("```").unwrap_or(body);
        return body.trim_end().to_string() + "\n";
    }
    code.to_string()
}

fn guess_dialect(code: &str) -> Dialect {
    let first = code.lines().next().unwrap_or("");
    if first.starts_with("#!") {
        return if first.contains("python") { Dialect::Script } else { Dialect::Shell };
    }
    let py_markers = ["import ", "print(", "def ", "for ", "with open("];
    if py_markers.iter().any(|m| code.contains(m)) {
        Dialect::Script
    } else {
        Dialect::Shell
    }
}

fn code_field(o: &Map<String, Value>) -> Result<String, String> {
    match o.get("code") {
        Some(Value::String(s)) => Ok(strip_fences(s)),
        Some(Value::Null) | None => Err("missing `code`".into()),
        Some(other) => Ok(value_text(other)),
    }
}

/// Initial artifact from the task description.
pub fn generate(
    task: &str,
    context: &str,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    decoding: Decoding,
) -> Result<CodeArtifact, CodexError> {
    let prompt = prompts.render("programmer", &[("task", task), ("context", context)]);
    let mut req = CompletionRequest::new(AgentRole::Programmer, prompt);
    req.decoding = decoding;
    let (code, dialect) = consult_object(backend, &req, |o| {
        let code = code_field(&o)?;
        if code.trim().is_empty() {
            return Err("empty `code`".into());
        }
        let dialect = o
            .get("dialect")
            .and_then(Value::as_str)
            .and_then(Dialect::from_name)
            .unwrap_or_else(|| guess_dialect(&code));
        Ok((code, dialect))
    })
    .map_err(|e| match e {
        AgentError::Unparseable { .. } => CodexError::NoCode,
        other => CodexError::Agent(other),
    })?;
    CodeArtifact::init(code, dialect, task).ok_or(CodexError::NoCode)
}

/// Rewrites `code` according to `analysis`. One retry is allowed when the
/// backend returns identical or empty source.
pub fn refine(
    code: &CodeArtifact,
    analysis: &ErrorAnalysis,
    task: &str,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    decoding: Decoding,
) -> Result<CodeArtifact, CodexError> {
    let mut note = "";
    for _ in 0..2 {
        let prompt = prompts.render(
            "programmer_refine",
            &[
                ("task", task),
                ("dialect", dialect_name(code.dialect)),
                ("code", &code.source),
                ("class", analysis.class.as_str()),
                ("fragment", analysis.fragment.as_deref().unwrap_or("(unknown)")),
                ("fix", &analysis.fix),
                ("note", note),
            ],
        );
        let mut req = CompletionRequest::new(AgentRole::Programmer, prompt);
        req.decoding = decoding;
        let source = consult_object(backend, &req, |o| code_field(&o))?;
        if !source.trim().is_empty() && source.trim() != code.source.trim() {
            return Ok(CodeArtifact {
                source,
                dialect: code.dialect,
                stage: Stage::Mod,
                task_signature: code.task_signature.clone(),
                revision: code.revision + 1,
            });
        }
        note = "Your previous rewrite was empty or identical to the original. Change the code.\n";
    }
    Err(CodexError::RefinementFailure(format!(
        "no change to revision {} after two attempts",
        code.revision
    )))
}

fn parse_score(v: Option<&Value>) -> Option<i64> {
    match v? {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => s.trim().split('/').next()?.trim().parse().ok(),
        _ => None,
    }
}

fn parse_judge(v: Option<&Value>) -> Option<Judge> {
    match v? {
        Value::Bool(true) => Some(Judge::Accomplished),
        Value::Bool(false) => Some(Judge::NotAccomplished),
        Value::String(s) => {
            let s = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
            match s.as_str() {
                "accomplished" | "yes" | "true" | "success" => Some(Judge::Accomplished),
                "not_accomplished" | "no" | "false" | "failure" => Some(Judge::NotAccomplished),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Judges an executed artifact against the task. Scores are clamped to
/// 0..=10; a faulted or non-zero-exit run is never accomplished.
pub fn evaluate(
    code: &CodeArtifact,
    out: &ExecutionOutcome,
    task: &str,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    decoding: Decoding,
) -> Result<Evaluation, CodexError> {
    let exit = exit_text(out);
    let prompt = prompts.render(
        "programmer_evaluate",
        &[
            ("task", task),
            ("dialect", dialect_name(code.dialect)),
            ("code", &code.source),
            ("exit", &exit),
            ("fault", fault_name(out.fault)),
            ("stdout", &out.stdout),
            ("stderr", &out.stderr),
        ],
    );
    let mut req = CompletionRequest::new(AgentRole::Programmer, prompt);
    req.decoding = decoding;
    let (judge, raw_score, rationale) = consult_object(backend, &req, |o| {
        let judge = parse_judge(o.get("judge")).ok_or("missing or unknown `judge`")?;
        let score = parse_score(o.get("score")).ok_or("missing numeric `score`")?;
        let rationale = o.get("rationale").map(value_text).unwrap_or_default();
        Ok((judge, score, rationale))
    })?;
    let score = raw_score.clamp(0, 10) as u8;
    let mut eval = Evaluation {
        judge,
        score,
        rationale,
        score_clamped: i64::from(score) != raw_score,
    };
    if eval.judge == Judge::Accomplished && (out.fault != Fault::None || out.exit_status != Some(0)) {
        eval.judge = Judge::NotAccomplished;
        eval.rationale = format!("{} [downgraded: run did not exit cleanly]", eval.rationale);
    }
    Ok(eval)
}

/// The full chain: reuse or generate, execute, evaluate, then up to
/// [`MAX_REFINE_CYCLES`] rounds of analyze, refine, execute and evaluate.
pub fn run_pipeline(
    task: &str,
    context: &str,
    library: &mut ToolLibrary,
    mut execute: impl FnMut(&CodeArtifact) -> Result<ExecutionOutcome, CodexError>,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    decoding: Decoding,
) -> Result<PipelineRun, CodexError> {
    let signature = task_signature(task);
    let mut events = Vec::new();
    let from_library = library.get(&signature).is_some();
    let mut code = match library.artifact(&signature) {
        Some(c) => {
            events.push(CodexEvent::LibraryHit {
                task_signature: signature.clone(),
            });
            c
        }
        None => generate(task, context, backend, prompts, decoding)?,
    };
    events.push(CodexEvent::Artifact { artifact: code.clone() });
    let mut outcome = execute(&code)?;
    events.push(CodexEvent::Outcome {
        revision: code.revision,
        outcome: outcome.clone(),
    });
    let mut evaluation = evaluate(&code, &outcome, task, backend, prompts, decoding)?;
    events.push(CodexEvent::Evaluation {
        revision: code.revision,
        evaluation: evaluation.clone(),
    });

    let mut cycles = 0;
    while !evaluation.accomplished() && cycles < MAX_REFINE_CYCLES {
        cycles += 1;
        let analysis = analyze_errors(&code, &outcome, Some(&evaluation), task, backend, prompts, decoding)?;
        events.push(CodexEvent::Analysis {
            revision: code.revision,
            analysis: analysis.clone(),
        });
        code = match refine(&code, &analysis, task, backend, prompts, decoding) {
            Ok(c) => c,
            Err(CodexError::RefinementFailure(reason)) => {
                events.push(CodexEvent::Stopped {
                    revision: code.revision,
                    reason,
                });
                break;
            }
            Err(e) => return Err(e),
        };
        events.push(CodexEvent::Artifact { artifact: code.clone() });
        outcome = execute(&code)?;
        events.push(CodexEvent::Outcome {
            revision: code.revision,
            outcome: outcome.clone(),
        });
        evaluation = evaluate(&code, &outcome, task, backend, prompts, decoding)?;
        events.push(CodexEvent::Evaluation {
            revision: code.revision,
            evaluation: evaluation.clone(),
        });
    }

    let retained = evaluation.accomplished() && retain(library, &code, &evaluation);
    if retained {
        events.push(CodexEvent::Retained {
            task_signature: signature,
            score: evaluation.score,
        });
    }
    Ok(PipelineRun {
        code,
        outcome,
        evaluation,
        events,
        cycles,
        retained,
        from_library,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Script, ScriptedBackend};
    use serde_json::json;

    fn run_fake(code: &CodeArtifact) -> Result<ExecutionOutcome, CodexError> {
        if code.source.contains("undefined_name") {
            Ok(ExecutionOutcome::failed(
                "  File \"main.py\", line 1, in <module>\nNameError: name 'undefined_name' is not defined\n",
                1,
            ))
        } else {
            Ok(ExecutionOutcome::ok("3\n"))
        }
    }

    #[test]
    fn signature_normalizes() {
        assert_eq!(task_signature("  Count the FILES, please!"), "count the files please");
    }

    #[test]
    fn name_error_fixed_in_one_cycle() {
        let script = Script::new()
            .with(AgentRole::Programmer, json!({"code": "print(undefined_name)", "dialect": "python"}))
            .with(AgentRole::Programmer, json!({"judge": "not_accomplished", "score": 1}))
            .with(AgentRole::Programmer, json!({"class": "name-error", "fix": "print 3"}))
            .with(AgentRole::Programmer, json!({"code": "print(3)"}))
            .with(AgentRole::Programmer, json!({"judge": "accomplished", "score": 9}));
        let mut b = ScriptedBackend::new(script);
        let mut lib = ToolLibrary::new();
        let run = run_pipeline("print three", "", &mut lib, run_fake, &mut b, &PromptSet::builtin(), Decoding::default()).unwrap();
        assert!(run.accomplished());
        assert_eq!(run.cycles, 1);
        assert_eq!(run.code.stage, Stage::Mod);
        assert_eq!(run.code.dialect, Dialect::Script);
        assert!(run.retained);
        assert_eq!(lib.len(), 1);
        let kinds: Vec<&str> = run
            .events
            .iter()
            .map(|e| match e {
                CodexEvent::Artifact { .. } => "artifact",
                CodexEvent::Outcome { .. } => "outcome",
                CodexEvent::Evaluation { .. } => "evaluation",
                CodexEvent::Analysis { .. } => "analysis",
                CodexEvent::Retained { .. } => "retained",
                _ => "other",
            })
            .collect();
        assert_eq!(kinds, ["artifact", "outcome", "evaluation", "analysis", "artifact", "outcome", "evaluation", "retained"]);

        // second run reuses the library without generating
        let mut b2 = ScriptedBackend::new(Script::new().with(AgentRole::Programmer, json!({"judge": "accomplished", "score": 9})));
        let again = run_pipeline("Print three", "", &mut lib, run_fake, &mut b2, &PromptSet::builtin(), Decoding::default()).unwrap();
        assert!(again.from_library && again.accomplished());
        assert_eq!(b2.calls(AgentRole::Programmer), 1);
    }

    #[test]
    fn echoed_source_is_refinement_failure() {
        let c = CodeArtifact::init("print(x)", Dialect::Script, "t").unwrap();
        let a = ErrorAnalysis {
            class: super::super::FailureClass::NameError,
            line: Some(1),
            fragment: None,
            fix: "none".into(),
        };
        let mut b = ScriptedBackend::new(Script::new().with(AgentRole::Programmer, json!({"code": "print(x)"})).repeating());
        let r = refine(&c, &a, "t", &mut b, &PromptSet::builtin(), Decoding::default());
        assert!(matches!(r, Err(CodexError::RefinementFailure(_))));
        assert_eq!(b.calls(AgentRole::Programmer), 2);
    }

    #[test]
    fn shell_stays_shell() {
        let c = CodeArtifact::init("ehco hi", Dialect::Shell, "t").unwrap();
        let a = ErrorAnalysis {
            class: super::super::FailureClass::CommandNotFound,
            line: Some(1),
            fragment: Some("ehco hi".into()),
            fix: "use echo".into(),
        };
        let mut b = ScriptedBackend::new(Script::new().with(AgentRole::Programmer, json!({"code": "print('hi')", "dialect": "python"})));
        let m = refine(&c, &a, "t", &mut b, &PromptSet::builtin(), Decoding::default()).unwrap();
        assert_eq!(m.dialect, Dialect::Shell);
        assert_eq!(m.revision, 1);
    }

    #[test]
    fn evaluation_clamps_and_downgrades() {
        let c = CodeArtifact::init("x", Dialect::Shell, "t").unwrap();
        let mut b = ScriptedBackend::new(Script::new().with(AgentRole::Programmer, json!({"judge": "accomplished", "score": 42})).repeating());
        let e = evaluate(&c, &ExecutionOutcome::ok("fine"), "t", &mut b, &PromptSet::builtin(), Decoding::default()).unwrap();
        assert_eq!((e.score, e.score_clamped, e.judge), (10, true, Judge::Accomplished));
        let mut crash = ExecutionOutcome::failed("boom", 1);
        crash.fault = Fault::Crash;
        let e = evaluate(&c, &crash, "t", &mut b, &PromptSet::builtin(), Decoding::default()).unwrap();
        assert_eq!(e.judge, Judge::NotAccomplished);
    }
}
