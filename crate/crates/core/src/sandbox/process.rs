//! Process-per-case execution of a runner shim under resource limits.

use std::io::{Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::wire::{self, WireRequest};
use super::{ResourceLimits, SandboxError, SandboxStatus, SandboxVerdict};
use crate::sync::Semaphore;

pub const INTERPRETER_ENV: &str = "SANDBOX_INTERPRETER";

/// Bytes of stderr kept for diagnostics.
const STDERR_TAIL: usize = 2048;

/// How to find and launch the runner shim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpreterConfig {
    /// Explicit interpreter path; takes precedence over the environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpreter: Option<PathBuf>,
    /// Interpreter arguments, e.g. `["-I", "runner_shim.py"]`.
    #[serde(default)]
    pub args: Vec<String>,
    /// Fall back to searching `PATH` for `default_name`. Disabled in
    /// benchmark mode so that a system interpreter is never picked silently.
    #[serde(default)]
    pub allow_path_lookup: bool,
    #[serde(default = "default_name")]
    pub default_name: String,
    /// Best-effort: run each case in fresh user and network namespaces.
    #[serde(default = "yes")]
    pub isolate_network: bool,
    /// Concurrent processes; defaults to the host CPU count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_name() -> String {
    "python3".into()
}

fn yes() -> bool {
    true
}

impl Default for InterpreterConfig {
    fn default() -> Self {
        Self {
            interpreter: None,
            args: Vec::new(),
            allow_path_lookup: false,
            default_name: default_name(),
            isolate_network: true,
            workers: None,
        }
    }
}

fn is_executable(path: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    path.metadata().is_ok_and(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
}

impl InterpreterConfig {
    pub fn with_interpreter(path: impl Into<PathBuf>) -> Self {
        Self { interpreter: Some(path.into()), ..Self::default() }
    }

    /// Config key, then `SANDBOX_INTERPRETER`, then (if allowed) `PATH`.
    pub fn resolve(&self) -> Result<PathBuf, SandboxError> {
        self.resolve_with(std::env::var_os(INTERPRETER_ENV).map(PathBuf::from), std::env::var_os("PATH"))
    }

    fn resolve_with(
        &self,
        env_value: Option<PathBuf>,
        search_path: Option<std::ffi::OsString>,
    ) -> Result<PathBuf, SandboxError> {
        let (candidate, source) = if let Some(path) = &self.interpreter {
            (Some(path.clone()), "configured interpreter")
        } else if let Some(path) = env_value.filter(|p| !p.as_os_str().is_empty()) {
            (Some(path), INTERPRETER_ENV)
        } else if self.allow_path_lookup {
            let found = search_path
                .iter()
                .flat_map(std::env::split_paths)
                .map(|dir| dir.join(&self.default_name))
                .find(|p| is_executable(p));
            (found, "PATH lookup")
        } else {
            return Err(SandboxError::Unavailable(format!(
                "no interpreter configured and {INTERPRETER_ENV} is not set"
            )));
        };
        match candidate {
            Some(path) if is_executable(&path) => Ok(path),
            Some(path) => Err(SandboxError::Unavailable(format!("{source} {} is not executable", path.display()))),
            None => Err(SandboxError::Unavailable(format!("{} not found on PATH", self.default_name))),
        }
    }
}

/// Spawns one shim process per request.
#[derive(Debug)]
pub struct ProcessExecutor {
    interpreter: PathBuf,
    args: Vec<String>,
    isolate_network: bool,
    slots: Semaphore,
}

fn host_cpus() -> usize {
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl ProcessExecutor {
    pub fn new(config: &InterpreterConfig) -> Result<Self, SandboxError> {
        let interpreter = config.resolve()?;
        Ok(Self {
            interpreter,
            args: config.args.clone(),
            isolate_network: config.isolate_network,
            slots: Semaphore::new(config.workers.unwrap_or_else(host_cpus)),
        })
    }

    pub fn interpreter(&self) -> &Path {
        &self.interpreter
    }

    fn spawn(&self, scratch: &Path, limits: &ResourceLimits) -> Result<Child, SandboxError> {
        let mut command = Command::new(&self.interpreter);
        command
            .args(&self.args)
            .current_dir(scratch)
            .env_clear()
            .env("PATH", "/usr/bin:/bin")
            .env("HOME", scratch)
            .env("TMPDIR", scratch)
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONHASHSEED", "0")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let memory = limits.memory_cap as libc::rlim_t;
        let cpu = limits.cpu_timeout.as_secs_f64().ceil().max(1.0) as libc::rlim_t;
        let isolate = self.isolate_network;
        // SAFETY: the closure runs in the forked child before exec and only
        // issues async-signal-safe system calls.
        unsafe {
            command.pre_exec(move || {
                libc::setpgid(0, 0);
                let set = |resource, soft: libc::rlim_t, hard: libc::rlim_t| {
                    let limit = libc::rlimit { rlim_cur: soft, rlim_max: hard };
                    libc::setrlimit(resource, &limit)
                };
                set(libc::RLIMIT_AS, memory, memory);
                set(libc::RLIMIT_CPU, cpu, cpu + 1);
                // regular-file writes fail outright; pipes are unaffected
                set(libc::RLIMIT_FSIZE, 0, 0);
                set(libc::RLIMIT_CORE, 0, 0);
                if isolate {
                    // refused without unprivileged user namespaces; that is fine
                    libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET);
                }
                Ok(())
            });
        }
        command.spawn().map_err(|e| {
            SandboxError::Unavailable(format!("spawning {}: {e}", self.interpreter.display()))
        })
    }
}

fn resident_bytes(pid: u32) -> Option<u64> {
    let statm = std::fs::read_to_string(format!("/proc/{pid}/statm")).ok()?;
    let pages: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    // SAFETY: sysconf has no preconditions.
    let page = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    Some(pages * page.max(1) as u64)
}

fn kill_group(child: &mut Child) {
    // SAFETY: negative pid addresses the process group created in pre_exec.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
    let _ = child.kill();
}

/// Reads a pipe to the end, keeping at most `cap` bytes and flagging overflow.
fn read_capped(mut pipe: impl Read + Send + 'static, cap: usize, overflow: Arc<AtomicBool>) -> JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match pipe.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                    if n > room {
                        overflow.store(true, Ordering::SeqCst);
                    }
                }
            }
        }
        kept
    })
}

/// Keeps the last `STDERR_TAIL` bytes.
fn read_tail(mut pipe: impl Read + Send + 'static) -> JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut tail = Vec::new();
        let mut buf = [0u8; 4096];
        loop {
            match pipe.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    tail.extend_from_slice(&buf[..n]);
                    if tail.len() > 2 * STDERR_TAIL {
                        tail.drain(..tail.len() - STDERR_TAIL);
                    }
                }
            }
        }
        if tail.len() > STDERR_TAIL {
            tail.drain(..tail.len() - STDERR_TAIL);
        }
        tail
    })
}

enum Kill {
    Wall,
    Memory,
    Output,
}

impl super::Executor for ProcessExecutor {
    fn execute(&self, request: &WireRequest, limits: &ResourceLimits) -> Result<SandboxVerdict, SandboxError> {
        let _slot = self.slots.acquire();
        let scratch = tempfile::Builder::new()
            .prefix("pat-case-")
            .tempdir()
            .map_err(|e| SandboxError::Unavailable(format!("creating scratch directory: {e}")))?;
        let mut child = self.spawn(scratch.path(), limits)?;
        let started = Instant::now();

        let payload = wire::encode(request);
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = thread::spawn(move || {
            let _ = stdin.write_all(&payload);
        });
        let overflow = Arc::new(AtomicBool::new(false));
        let stdout = read_capped(child.stdout.take().expect("piped stdout"), limits.output_cap as usize, overflow.clone());
        let stderr = read_tail(child.stderr.take().expect("piped stderr"));

        let mut killed = None;
        let mut pause = Duration::from_millis(1);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) => {}
                Err(_) => break None,
            }
            let breach = if overflow.load(Ordering::SeqCst) {
                Some(Kill::Output)
            } else if started.elapsed() >= limits.wall_timeout {
                Some(Kill::Wall)
            } else if resident_bytes(child.id()).is_some_and(|rss| rss > limits.memory_cap) {
                Some(Kill::Memory)
            } else {
                None
            };
            if let Some(reason) = breach {
                kill_group(&mut child);
                killed = Some(reason);
                break child.wait().ok();
            }
            thread::sleep(pause);
            pause = (pause * 2).min(Duration::from_millis(10));
        };
        // descendants may still hold the pipes open
        kill_group(&mut child);
        let _ = writer.join();
        let out = stdout.join().unwrap_or_default();
        let err_tail = String::from_utf8_lossy(&stderr.join().unwrap_or_default()).into_owned();

        match killed {
            Some(Kill::Output) => {
                return Ok(SandboxVerdict::failed(
                    SandboxStatus::ProtocolError,
                    format!("output exceeded {} bytes", limits.output_cap),
                ))
            }
            Some(Kill::Wall) => {
                return Ok(SandboxVerdict::failed(
                    SandboxStatus::Timeout,
                    format!("killed after {} ms wall time", limits.wall_timeout.as_millis()),
                ))
            }
            Some(Kill::Memory) => {
                return Ok(SandboxVerdict::failed(
                    SandboxStatus::Memory,
                    format!("resident memory exceeded {} bytes", limits.memory_cap),
                ))
            }
            None => {}
        }
        match wire::decode_response(&out) {
            Ok(response) => Ok(SandboxVerdict::from_response(response)),
            Err(error) => {
                let signal = status.and_then(|s| s.signal());
                if signal == Some(libc::SIGXCPU) || signal == Some(libc::SIGKILL) {
                    Ok(SandboxVerdict::failed(SandboxStatus::Timeout, "CPU time limit exceeded"))
                } else if err_tail.contains("memory allocation of") || err_tail.contains("MemoryError") {
                    Ok(SandboxVerdict::failed(SandboxStatus::Memory, err_tail))
                } else {
                    let exit = status.map(|s| s.to_string()).unwrap_or_else(|| "unknown status".into());
                    Ok(SandboxVerdict::failed(
                        SandboxStatus::ProtocolError,
                        format!("shim {exit} without a valid response ({error}); stderr: {err_tail}"),
                    ))
                }
            }
        }
    }
}
