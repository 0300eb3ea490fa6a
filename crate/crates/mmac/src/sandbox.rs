//! Runs generated code in a child process confined by Landlock.
//!
//! Each run gets a fresh working directory. The child can read the whole
//! filesystem but write only beneath that directory (and `/dev/null`), and
//! every TCP bind or connect is refused unless the environment enables the
//! network. A wall-clock deadline kills the whole process group.

use std::fs;
use std::io::Read;
use std::os::fd::{AsRawFd, OwnedFd};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use landlock::{
    path_beneath_rules, Access, AccessFs, AccessNet, CompatLevel, Compatible, Ruleset, RulesetAttr,
    RulesetCreatedAttr, ABI,
};
use mmac_core::codex::{CodeArtifact, CodexError, Dialect, ExecutionEnv, ExecutionOutcome, Executor, Fault};

const PATH: &str = "/usr/local/bin:/usr/bin:/bin";
const POLL: Duration = Duration::from_millis(5);
// Landlock ABI that first covers TCP.
const NET_ABI: ABI = ABI::V4;

/// Version of the Landlock ABI the running kernel offers, if any.
pub fn landlock_abi() -> Option<i64> {
    // LANDLOCK_CREATE_RULESET_VERSION
    let v = unsafe { libc::syscall(libc::SYS_landlock_create_ruleset, std::ptr::null::<u8>(), 0usize, 1u32) };
    (v > 0).then_some(v)
}

fn ruleset(workdir: &Path, network: bool) -> Result<OwnedFd, String> {
    let abi = NET_ABI;
    let mut rs = Ruleset::default()
        .set_compatibility(CompatLevel::HardRequirement)
        .handle_access(AccessFs::from_all(abi))
        .map_err(|e| e.to_string())?;
    if !network {
        rs = rs.handle_access(AccessNet::from_all(abi)).map_err(|e| e.to_string())?;
    }
    let created = rs
        .create()
        .map_err(|e| e.to_string())?
        .add_rules(path_beneath_rules(["/"], AccessFs::from_read(abi)))
        .map_err(|e| e.to_string())?
        .add_rules(path_beneath_rules([workdir, Path::new("/dev/null")], AccessFs::from_all(abi)))
        .map_err(|e| e.to_string())?;
    let fd: Option<OwnedFd> = created.into();
    fd.ok_or_else(|| "landlock is not supported by this kernel".to_string())
}

fn read_capped(mut r: impl Read + Send + 'static, cap: usize) -> thread::JoinHandle<(Vec<u8>, bool)> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        let mut truncated = false;
        loop {
            match r.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    if room < n {
                        truncated = true;
                    }
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        (kept, truncated)
    })
}

fn looks_like_policy_block(stderr: &str) -> bool {
    ["Permission denied", "PermissionError", "Read-only file system", "Operation not permitted"]
        .iter()
        .any(|m| stderr.contains(m))
}

/// Executes code under Landlock. Files listed as inputs are copied into
/// each fresh working directory before the run.
#[derive(Debug, Clone, Default)]
pub struct SandboxExecutor {
    inputs: Vec<PathBuf>,
    scratch: Option<PathBuf>,
}

impl SandboxExecutor {
    pub fn new() -> Self {
        SandboxExecutor::default()
    }

    pub fn with_inputs(mut self, files: impl IntoIterator<Item = PathBuf>) -> Self {
        self.inputs.extend(files);
        self
    }

    /// Parent directory for fresh working directories (system temp by default).
    pub fn scratch_in(mut self, dir: impl Into<PathBuf>) -> Self {
        self.scratch = Some(dir.into());
        self
    }

    fn run_in(&self, dir: &Path, code: &CodeArtifact, env: &ExecutionEnv) -> Result<ExecutionOutcome, CodexError> {
        let unavailable = |what: &str, e: std::io::Error| CodexError::SandboxUnavailable(format!("{what}: {e}"));
        for input in &self.inputs {
            let name = input
                .file_name()
                .ok_or_else(|| CodexError::SandboxUnavailable(format!("bad input path {}", input.display())))?;
            fs::copy(input, dir.join(name)).map_err(|e| unavailable(&input.display().to_string(), e))?;
        }
        let (script, program, args): (&str, &str, &[&str]) = match code.dialect {
            Dialect::Shell => ("main.sh", "sh", &[]),
            Dialect::Script => ("main.py", "python3", &["-B"]),
        };
        fs::write(dir.join(script), &code.source).map_err(|e| unavailable("writing script", e))?;

        let fd = ruleset(dir, env.network).map_err(CodexError::SandboxUnavailable)?;
        let raw = fd.as_raw_fd();
        let timeout = Duration::from_millis(env.timeout_ms());
        let cpu = env.cpu_seconds.unwrap_or(timeout.as_secs() + 1);
        let fsize = env.max_file_bytes;

        let mut cmd = Command::new(program);
        cmd.args(args)
            .arg(script)
            .current_dir(dir)
            .env_clear()
            .env("PATH", PATH)
            .env("HOME", dir)
            .env("TMPDIR", dir)
            .env("LANG", "C.UTF-8")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .envs(&env.env_vars)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);
        // Only async-signal-safe calls between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                if libc::prctl(libc::PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
                if libc::syscall(libc::SYS_landlock_restrict_self, raw, 0u32) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
                let cpu_lim = libc::rlimit {
                    rlim_cur: cpu,
                    rlim_max: cpu + 1,
                };
                libc::setrlimit(libc::RLIMIT_CPU, &cpu_lim);
                if let Some(b) = fsize {
                    let lim = libc::rlimit { rlim_cur: b, rlim_max: b };
                    libc::setrlimit(libc::RLIMIT_FSIZE, &lim);
                }
                Ok(())
            });
        }

        let started = Instant::now();
        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(ExecutionOutcome::failed(format!("{program}: command not found\n"), 127));
            }
            Err(e) => return Err(unavailable("spawning sandboxed process", e)),
        };
        drop(fd);
        let cap = env.max_output_bytes;
        let out_h = read_capped(child.stdout.take().expect("piped stdout"), cap);
        let err_h = read_capped(child.stderr.take().expect("piped stderr"), cap);

        let pgid = child.id() as libc::pid_t;
        let mut timed_out = false;
        let status = loop {
            match child.try_wait() {
                Ok(Some(s)) => break Some(s),
                Ok(None) if started.elapsed() >= timeout => {
                    unsafe {
                        libc::killpg(pgid, libc::SIGKILL);
                    }
                    timed_out = true;
                    break child.wait().ok();
                }
                Ok(None) => thread::sleep(POLL),
                Err(_) => break None,
            }
        };
        // Stragglers left in the group would keep the pipes open.
        unsafe {
            libc::killpg(pgid, libc::SIGKILL);
        }
        let (stdout, out_trunc) = out_h.join().unwrap_or_default();
        let (stderr, err_trunc) = err_h.join().unwrap_or_default();
        let stdout = String::from_utf8_lossy(&stdout).into_owned();
        let stderr = String::from_utf8_lossy(&stderr).into_owned();

        let mut outcome = ExecutionOutcome {
            stdout,
            stderr,
            exit_status: None,
            fault: Fault::None,
            note: None,
        };
        if timed_out {
            outcome.fault = Fault::Timeout;
            outcome.note = Some(format!("killed after {} ms", timeout.as_millis()));
        } else if let Some(s) = status {
            match (s.code(), s.signal()) {
                (Some(c), _) => {
                    outcome.exit_status = Some(c);
                    if c != 0 && looks_like_policy_block(&outcome.stderr) {
                        outcome.fault = Fault::Crash;
                        outcome.note = Some("policy: the sandbox refused a write or network access".into());
                    } else if c != 0 && outcome.stderr.contains("Traceback (most recent call last)") {
                        outcome.fault = Fault::Crash;
                        outcome.note = Some("unhandled exception".into());
                    }
                }
                (None, Some(sig)) => {
                    outcome.fault = Fault::Crash;
                    outcome.note = Some(match sig {
                        libc::SIGXCPU => "policy: cpu time limit reached".to_string(),
                        libc::SIGXFSZ => "policy: file size limit reached".to_string(),
                        other => format!("terminated by signal {other}"),
                    });
                }
                (None, None) => outcome.fault = Fault::Crash,
            }
        } else {
            outcome.fault = Fault::Crash;
            outcome.note = Some("lost track of the child process".into());
        }
        if out_trunc || err_trunc {
            let n = outcome.note.take().map(|n| format!("{n}; ")).unwrap_or_default();
            outcome.note = Some(format!("{n}output truncated at {cap} bytes"));
        }
        Ok(outcome)
    }
}

impl Executor for SandboxExecutor {
    fn execute(&mut self, code: &CodeArtifact, env: &ExecutionEnv) -> Result<ExecutionOutcome, CodexError> {
        match &env.working_dir {
            Some(d) => {
                let dir = PathBuf::from(d);
                fs::create_dir_all(&dir)
                    .map_err(|e| CodexError::SandboxUnavailable(format!("{}: {e}", dir.display())))?;
                self.run_in(&dir, code, env)
            }
            None => {
                let mut b = tempfile::Builder::new();
                b.prefix("mmac-run-");
                let tmp = match &self.scratch {
                    Some(s) => b.tempdir_in(s),
                    None => b.tempdir(),
                }
                .map_err(|e| CodexError::SandboxUnavailable(format!("creating working directory: {e}")))?;
                self.run_in(tmp.path(), code, env)
            }
        }
    }
}
