//! Cassette recording and JSONL storage.
//!
//! A cassette is one JSON object per line: `{digest, role, response_text,
//! usage}`. Credentials never reach the file; anything that looks like a
//! secret taken from the environment is replaced before the entry is kept.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use mmac_core::backend::{BackendError, CassetteEntry, CompletionBackend, CompletionRequest, CompletionResponse};

use crate::error::{Error, Result};

pub const REDACTED: &str = "[REDACTED]";

const SECRET_SUFFIXES: [&str; 4] = ["_API_KEY", "_TOKEN", "_SECRET", "_PASSWORD"];

/// Values of environment variables that hold credentials: the named ones
/// plus anything with a secret-looking suffix. Short values are skipped so
/// redaction cannot shred ordinary text.
pub fn secrets_from_env(named: &[String]) -> Vec<String> {
    let mut out: Vec<String> = std::env::vars()
        .filter(|(k, _)| named.contains(k) || SECRET_SUFFIXES.iter().any(|s| k.ends_with(s)))
        .map(|(_, v)| v)
        .filter(|v| v.len() >= 4)
        .collect();
    // Longest first so a secret containing another is removed whole.
    out.sort_by_key(|s| std::cmp::Reverse(s.len()));
    out.dedup();
    out
}

pub fn redact(text: &str, secrets: &[String]) -> String {
    let mut s = text.to_string();
    for secret in secrets {
        if s.contains(secret.as_str()) {
            s = s.replace(secret.as_str(), REDACTED);
        }
    }
    s
}

/// Shared sink the recorder appends to.
pub type Tape = Arc<Mutex<Vec<CassetteEntry>>>;

/// Wraps a backend and records every successful exchange.
pub struct RecordingBackend<B> {
    inner: B,
    tape: Tape,
    secrets: Vec<String>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, tape: Tape, secrets: Vec<String>) -> Self {
        RecordingBackend { inner, tape, secrets }
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&mut self, req: &CompletionRequest) -> std::result::Result<CompletionResponse, BackendError> {
        let resp = self.inner.complete(req)?;
        let entry = CassetteEntry {
            digest: req.digest(),
            role: req.role,
            response_text: redact(&resp.text, &self.secrets),
            usage: resp.usage,
        };
        self.tape.lock().unwrap_or_else(|p| p.into_inner()).push(entry);
        Ok(resp)
    }
}

pub fn to_jsonl(entries: &[CassetteEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        s.push_str(&serde_json::to_string(e).expect("cassette entries serialize"));
        s.push('\n');
    }
    s
}

pub fn write(path: &Path, entries: &[CassetteEntry]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_jsonl(entries).as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Vec<CassetteEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: CassetteEntry =
            serde_json::from_str(line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(e);
    }
    Ok(out)
}
