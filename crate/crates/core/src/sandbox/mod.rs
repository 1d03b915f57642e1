//! Isolated execution of one program against one test case.

pub mod inprocess;
pub mod minipy;
pub mod process;
pub mod wire;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use inprocess::InProcessExecutor;
pub use process::{InterpreterConfig, ProcessExecutor, INTERPRETER_ENV};
pub use wire::{WireRequest, WireResponse, WireStatus as SandboxStatus, WIRE_VERSION};

use crate::policy::Program;
use crate::verification::literal::Literal;
use crate::verification::{TestCase, TestVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceLimits {
    #[serde(with = "millis")]
    pub wall_timeout: Duration,
    #[serde(with = "millis")]
    pub cpu_timeout: Duration,
    pub memory_cap: u64,
    pub output_cap: u64,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl Default for ResourceLimits {
    fn default() -> Self {
        Self {
            wall_timeout: Duration::from_secs(10),
            cpu_timeout: Duration::from_secs(5),
            memory_cap: 512 << 20,
            output_cap: 64 << 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LimitsError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("wall timeout is shorter than the CPU timeout")]
    WallBelowCpu,
}

impl ResourceLimits {
    pub fn validate(&self) -> Result<(), LimitsError> {
        for (name, zero) in [
            ("wall_timeout", self.wall_timeout.is_zero()),
            ("cpu_timeout", self.cpu_timeout.is_zero()),
            ("memory_cap", self.memory_cap == 0),
            ("output_cap", self.output_cap == 0),
        ] {
            if zero {
                return Err(LimitsError::NotPositive(name));
            }
        }
        if self.wall_timeout < self.cpu_timeout {
            return Err(LimitsError::WallBelowCpu);
        }
        Ok(())
    }
}

/// Outcome of one sandboxed invocation. `value_text` is present iff the
/// status is `ok`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxVerdict {
    pub status: SandboxStatus,
    pub value_text: Option<String>,
    pub stderr_tail: String,
}

impl SandboxVerdict {
    pub fn ok(value: impl Into<String>) -> Self {
        Self { status: SandboxStatus::Ok, value_text: Some(value.into()), stderr_tail: String::new() }
    }

    pub fn failed(status: SandboxStatus, stderr_tail: impl Into<String>) -> Self {
        debug_assert!(status != SandboxStatus::Ok);
        Self { status, value_text: None, stderr_tail: stderr_tail.into() }
    }

    pub fn from_response(response: WireResponse) -> Self {
        match (response.status, response.value) {
            (SandboxStatus::Ok, Some(value)) => Self::ok(value),
            (SandboxStatus::Ok, None) => Self::failed(SandboxStatus::ProtocolError, "ok response without a value"),
            (status, _) => Self::failed(status, response.stderr_tail),
        }
    }
}

/// Infrastructure failures, distinct from candidate failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SandboxError {
    #[error("sandbox unavailable: {0}")]
    Unavailable(String),
}

/// Runs single wire requests. Implementations must be safe for concurrent
/// callers and must isolate requests from one another.
pub trait Executor: Send + Sync {
    fn execute(&self, request: &WireRequest, limits: &ResourceLimits) -> Result<SandboxVerdict, SandboxError>;
}

pub fn run_case(
    executor: &dyn Executor,
    program: &Program,
    case: &TestCase,
    limits: &ResourceLimits,
) -> Result<SandboxVerdict, SandboxError> {
    let request = WireRequest::new(program.rendered.clone(), program.entry_point(), case.args_list());
    executor.execute(&request, limits)
}

/// Exception type named at the start of an exception tail, e.g.
/// `NameError: name 'x' is not defined` → `NameError`.
pub fn exception_type(stderr_tail: &str) -> &str {
    let line = stderr_tail.trim_start();
    let end = line.find(|c: char| !(c == '_' || c == '.' || c.is_alphanumeric())).unwrap_or(line.len());
    &line[..end]
}

pub fn verdict_to_test_verdict(verdict: &SandboxVerdict, expected: &Literal) -> TestVerdict {
    match verdict.status {
        SandboxStatus::Ok => match verdict.value_text.as_deref().map(Literal::parse) {
            Some(Ok(value)) if value.output_eq(expected) => TestVerdict::Pass,
            _ => TestVerdict::WrongOutput,
        },
        SandboxStatus::Exception => match exception_type(&verdict.stderr_tail) {
            "NameError" | "UnboundLocalError" => TestVerdict::UnresolvedName,
            "MemoryError" => TestVerdict::Memory,
            _ => TestVerdict::Exception,
        },
        SandboxStatus::Timeout => TestVerdict::Timeout,
        SandboxStatus::Memory => TestVerdict::Memory,
        SandboxStatus::ProtocolError => TestVerdict::Exception,
    }
}
