//! Backend configuration files and backend construction.
//!
//! ```toml
//! [decoding]
//! temperature = 0.0
//!
//! [default]
//! kind = "remote"
//! api_key_env = "OPENAI_API_KEY"
//!
//! [roles.Viewer]
//! kind = "replay"
//! cassette = "viewer.jsonl"
//! ```
//!
//! Relative `script` and `cassette` paths resolve against the config file's
//! directory. Keys are only ever named, never written inline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mmac_core::backend::{
    bind_roles, BackendConfig, BackendKind, CassetteEntry, CompletionBackend, Decoding, ReplayBackend,
    ResolvedBinding, RoleBackends, Script, ScriptedBackend,
};
use mmac_core::protocol::AgentRole;

use crate::cassette::{self, secrets_from_env, RecordingBackend, Tape};
use crate::error::{Error, Result};
use crate::remote::{RemoteBackend, RetryPolicy};

const INLINE_SECRET_KEYS: [&str; 5] = ["api_key", "key", "token", "secret", "password"];

fn reject_inline_secrets(v: &toml::Value, path: &Path) -> Result<()> {
    if let toml::Value::Table(t) = v {
        for (k, child) in t {
            if INLINE_SECRET_KEYS.contains(&k.to_ascii_lowercase().as_str()) {
                return Err(Error::format(
                    path,
                    format!("`{k}` looks like an inline credential; name an environment variable with api_key_env"),
                ));
            }
            reject_inline_secrets(child, path)?;
        }
    }
    Ok(())
}

pub fn parse(text: &str, path: &Path) -> Result<BackendConfig> {
    let raw: toml::Value = toml::from_str(text).map_err(|e| Error::format(path, e.message()))?;
    reject_inline_secrets(&raw, path)?;
    toml::from_str(text).map_err(|e| Error::format(path, e.message()))
}

pub fn load(path: &Path) -> Result<BackendConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

/// Reads a script file: either a bare script or any document with a
/// `script` field (scenario and task files).
pub fn load_script(path: &Path) -> Result<Script> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    let inner = match v.get("script") {
        Some(s) if v.get("responses").is_none() => s.clone(),
        _ => v,
    };
    serde_json::from_value(inner).map_err(|e| Error::format(path, e))
}

/// How to build backends beyond what the config file says.
#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Directory relative paths resolve against.
    pub base_dir: PathBuf,
    /// Record every exchange here when set.
    pub tape: Option<Tape>,
    pub retry: RetryPolicy,
}

fn wrap<'a>(
    backends: &mut RoleBackends<'a>,
    role: AgentRole,
    b: impl CompletionBackend + 'a,
    tape: Option<&Tape>,
    secrets: &[String],
) {
    match tape {
        Some(t) => backends.bind(role, RecordingBackend::new(b, t.clone(), secrets.to_vec())),
        None => backends.bind(role, b),
    };
}

/// One backend per bound role. Fails if any role in `required` is left
/// unbound, a referenced file is missing, or a remote credential is unset.
pub fn build_backends(
    config: &BackendConfig,
    required: &[AgentRole],
    opts: &BuildOptions,
) -> Result<(RoleBackends<'static>, Decoding)> {
    let bound: BTreeMap<AgentRole, ResolvedBinding> = bind_roles(config, required)?;
    let key_envs: Vec<String> = bound.values().filter_map(|b| b.api_key_env.clone()).collect();
    let secrets = secrets_from_env(&key_envs);
    let resolve = |p: &str| {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            opts.base_dir.join(p)
        }
    };
    let mut scripts: BTreeMap<PathBuf, Script> = BTreeMap::new();
    let mut cassettes: BTreeMap<PathBuf, Vec<CassetteEntry>> = BTreeMap::new();
    let mut out = RoleBackends::new();
    for (role, b) in &bound {
        let tape = opts.tape.as_ref();
        match b.kind {
            BackendKind::Scripted => {
                let p = resolve(
                    b.script
                        .as_deref()
                        .ok_or_else(|| Error::NoScript(format!("{role} has kind \"scripted\" but no script")))?,
                );
                if !scripts.contains_key(&p) {
                    let s = load_script(&p)?;
                    scripts.insert(p.clone(), s);
                }
                wrap(&mut out, *role, ScriptedBackend::new(scripts[&p].clone()), tape, &secrets);
            }
            BackendKind::Replay => {
                let p = resolve(b.cassette.as_deref().ok_or_else(|| {
                    Error::Invalid(format!("{role} has kind \"replay\" but no cassette"))
                })?);
                if !cassettes.contains_key(&p) {
                    let c = cassette::read(&p)?;
                    cassettes.insert(p.clone(), c);
                }
                let mine = cassettes[&p].iter().filter(|e| e.role == *role).cloned();
                wrap(&mut out, *role, ReplayBackend::new(mine), tape, &secrets);
            }
            BackendKind::Remote => {
                let key_env = b.api_key_env.as_deref().unwrap_or("OPENAI_API_KEY");
                let r = RemoteBackend::from_env(b.model.clone(), b.endpoint.clone(), key_env)?.with_retry(opts.retry);
                wrap(&mut out, *role, r, tape, &secrets);
            }
        }
    }
    Ok((out, config.decoding.into()))
}

/// Every role answered from the same script.
pub fn scripted_backends(script: &Script, tape: Option<&Tape>) -> RoleBackends<'static> {
    let secrets = secrets_from_env(&[]);
    let mut out = RoleBackends::new();
    for role in AgentRole::ALL {
        wrap(&mut out, role, ScriptedBackend::new(script.clone()), tape, &secrets);
    }
    out
}
