use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use super::{CodeArtifact, CodexError, Dialect, Evaluation, ExecutionOutcome, Fault};
use crate::agents::{consult_object, PromptSet};
use crate::backend::{CompletionBackend, CompletionRequest, Decoding};
use crate::protocol::{value_text, AgentRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureClass {
    Nontermination,
    PolicyViolation,
    NameError,
    SyntaxError,
    ImportError,
    ZeroDivision,
    TypeError,
    ValueError,
    FileNotFound,
    LookupError,
    PermissionDenied,
    CommandNotFound,
    NonzeroExit,
    WrongOutput,
}

impl FailureClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::Nontermination => "nontermination",
            FailureClass::PolicyViolation => "policy-violation",
            FailureClass::NameError => "name-error",
            FailureClass::SyntaxError => "syntax-error",
            FailureClass::ImportError => "import-error",
            FailureClass::ZeroDivision => "zero-division",
            FailureClass::TypeError => "type-error",
            FailureClass::ValueError => "value-error",
            FailureClass::FileNotFound => "file-not-found",
            FailureClass::LookupError => "lookup-error",
            FailureClass::PermissionDenied => "permission-denied",
            FailureClass::CommandNotFound => "command-not-found",
            FailureClass::NonzeroExit => "nonzero-exit",
            FailureClass::WrongOutput => "wrong-output",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnalysis {
    pub class: FailureClass,
    /// 1-based line in the analyzed source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment: Option<String>,
    /// Proposed fix direction.
    pub fix: String,
}

const PY_EXCEPTIONS: &[(&str, FailureClass)] = &[
    ("NameError", FailureClass::NameError),
    ("UnboundLocalError", FailureClass::NameError),
    ("SyntaxError", FailureClass::SyntaxError),
    ("IndentationError", FailureClass::SyntaxError),
    ("ModuleNotFoundError", FailureClass::ImportError),
    ("ImportError", FailureClass::ImportError),
    ("ZeroDivisionError", FailureClass::ZeroDivision),
    ("TypeError", FailureClass::TypeError),
    ("ValueError", FailureClass::ValueError),
    ("FileNotFoundError", FailureClass::FileNotFound),
    ("KeyError", FailureClass::LookupError),
    ("IndexError", FailureClass::LookupError),
    ("PermissionError", FailureClass::PermissionDenied),
];

fn last_python_line(stderr: &str) -> Option<u32> {
    stderr
        .lines()
        .rev()
        .find_map(|l| {
            let l = l.trim_start();
            let rest = l.strip_prefix("File \"")?;
            let (_, after) = rest.split_once("\", line ")?;
            let digits: String = after.chars().take_while(char::is_ascii_digit).collect();
            digits.parse().ok()
        })
}

fn shell_line(stderr: &str) -> Option<u32> {
    // bash: "main.sh: line 3: ..."; dash: "main.sh: 3: ..."
    stderr.lines().find_map(|l| {
        let (_, rest) = l.split_once(".sh: ")?;
        let rest = rest.strip_prefix("line ").unwrap_or(rest);
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        if digits.is_empty() || !rest[digits.len()..].starts_with(':') {
            return None;
        }
        digits.parse().ok()
    })
}

/// Local failure classification from the outcome alone; returns the class
/// and the implicated source line, when one can be located.
pub fn classify(code: &CodeArtifact, out: &ExecutionOutcome) -> (FailureClass, Option<u32>) {
    if out.fault == Fault::Timeout {
        return (FailureClass::Nontermination, None);
    }
    let policy = out.note.as_deref().is_some_and(|n| n.starts_with("policy"));
    let line = match code.dialect {
        Dialect::Script => last_python_line(&out.stderr),
        Dialect::Shell => shell_line(&out.stderr),
    };
    if policy {
        return (FailureClass::PolicyViolation, line);
    }
    let class = match code.dialect {
        Dialect::Script => {
            let last = out.stderr.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
            PY_EXCEPTIONS
                .iter()
                .find(|(name, _)| last.trim_start().starts_with(name))
                .map(|(_, c)| *c)
        }
        Dialect::Shell => {
            let s = &out.stderr;
            if s.contains("not found") && !s.contains("No such file") {
                Some(FailureClass::CommandNotFound)
            } else if s.contains("Syntax error") || s.contains("syntax error") {
                Some(FailureClass::SyntaxError)
            } else if s.contains("No such file or directory") {
                Some(FailureClass::FileNotFound)
            } else if s.contains("Permission denied") {
                Some(FailureClass::PermissionDenied)
            } else if s.contains("parameter not set") || s.contains("unbound variable") {
                Some(FailureClass::NameError)
            } else {
                None
            }
        }
    };
    let class = class.unwrap_or(if out.exit_status == Some(0) && out.fault == Fault::None {
        FailureClass::WrongOutput
    } else {
        FailureClass::NonzeroExit
    });
    (class, line)
}

fn fragment(code: &CodeArtifact, line: Option<u32>) -> Option<String> {
    let n = line? as usize;
    code.source
        .lines()
        .nth(n.checked_sub(1)?)
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
}

pub(crate) fn fault_name(f: Fault) -> &'static str {
    match f {
        Fault::None => "none",
        Fault::Timeout => "timeout",
        Fault::Crash => "crash",
    }
}

pub(crate) fn exit_text(out: &ExecutionOutcome) -> String {
    out.exit_status
        .map(|e| e.to_string())
        .unwrap_or_else(|| String::from("(killed)"))
}

/// Structured analysis of a failed run. The class and fragment come from the
/// outcome itself; the backend contributes the fix direction.
#[allow(clippy::too_many_arguments)]
pub fn analyze_errors(
    code: &CodeArtifact,
    out: &ExecutionOutcome,
    eval: Option<&Evaluation>,
    task: &str,
    backend: &mut dyn CompletionBackend,
    prompts: &PromptSet,
    decoding: Decoding,
) -> Result<ErrorAnalysis, CodexError> {
    let judged_ok = eval.is_none_or(Evaluation::accomplished);
    if out.is_clean() && judged_ok {
        return Err(CodexError::CleanOutcome);
    }
    let (class, line) = classify(code, out);
    let fragment = fragment(code, line);
    let dialect = dialect_name(code.dialect);
    let exit = exit_text(out);
    let prompt = prompts.render(
        "programmer_analyze",
        &[
            ("task", task),
            ("dialect", dialect),
            ("code", &code.source),
            ("exit", &exit),
            ("fault", fault_name(out.fault)),
            ("stdout", &out.stdout),
            ("stderr", &out.stderr),
            ("class", class.as_str()),
            ("fragment", fragment.as_deref().unwrap_or("(unknown)")),
        ],
    );
    let mut req = CompletionRequest::new(AgentRole::Programmer, prompt);
    req.decoding = decoding;
    let fix = consult_object(backend, &req, |o| {
        o.get("fix")
            .filter(|v| !v.is_null())
            .map(value_text)
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| String::from("missing `fix`"))
    })?;
    Ok(ErrorAnalysis {
        class,
        line,
        fragment,
        fix,
    })
}

pub(crate) fn dialect_name(d: Dialect) -> &'static str {
    match d {
        Dialect::Shell => "shell",
        Dialect::Script => "python",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Script, ScriptedBackend};
    use serde_json::json;

    fn py(src: &str) -> CodeArtifact {
        CodeArtifact::init(src, Dialect::Script, "t").unwrap()
    }

    #[test]
    fn python_name_error_with_fragment() {
        let c = py("x = 1\nprint(y)\n");
        let out = ExecutionOutcome::failed(
            "Traceback (most recent call last):\n  File \"/tmp/w/main.py\", line 2, in <module>\n    print(y)\nNameError: name 'y' is not defined\n",
            1,
        );
        assert_eq!(classify(&c, &out), (FailureClass::NameError, Some(2)));
        assert_eq!(fragment(&c, Some(2)).as_deref(), Some("print(y)"));
    }

    #[test]
    fn timeout_is_nontermination() {
        let c = py("while True: pass");
        assert_eq!(classify(&c, &ExecutionOutcome::timeout()).0, FailureClass::Nontermination);
    }

    #[test]
    fn shell_lines_bash_and_dash() {
        let c = CodeArtifact::init("echo a\nfrobnicate\n", Dialect::Shell, "t").unwrap();
        let dash = ExecutionOutcome::failed("main.sh: 2: frobnicate: not found\n", 127);
        assert_eq!(classify(&c, &dash), (FailureClass::CommandNotFound, Some(2)));
        let bash = ExecutionOutcome::failed("main.sh: line 2: frobnicate: command not found\n", 127);
        assert_eq!(classify(&c, &bash), (FailureClass::CommandNotFound, Some(2)));
    }

    #[test]
    fn clean_outcome_is_precondition_violation() {
        let mut b = ScriptedBackend::new(Script::new());
        let r = analyze_errors(&py("print(1)"), &ExecutionOutcome::ok("1"), None, "t", &mut b, &PromptSet::builtin(), Decoding::default());
        assert_eq!(r, Err(CodexError::CleanOutcome));
    }

    #[test]
    fn backend_supplies_fix() {
        let mut b = ScriptedBackend::new(Script::new().with(
            AgentRole::Programmer,
            json!({"class": "whatever", "fix": "define y"}),
        ));
        let out = ExecutionOutcome::failed("  File \"main.py\", line 1\nNameError: name 'y' is not defined", 1);
        let a = analyze_errors(&py("print(y)"), &out, None, "t", &mut b, &PromptSet::builtin(), Decoding::default()).unwrap();
        assert_eq!(a.class, FailureClass::NameError);
        assert_eq!(a.fix, "define y");
        assert_eq!(a.fragment.as_deref(), Some("print(y)"));
    }
}
