//! Host-side executor that interprets candidates with the bundled
//! interpreter instead of spawning a runner shim. It honours the same wire
//! contract: each request is encoded, served and decoded exactly as the
//! process executor would.

use std::time::Instant;

use super::minipy::{self, Budget};
use super::wire::{self, WireRequest};
use super::{Executor, ResourceLimits, SandboxError, SandboxStatus, SandboxVerdict};
use crate::sync::Semaphore;

/// Interpreter steps granted per second of CPU budget. Step counting keeps
/// timeouts deterministic; the wall deadline is a backstop.
pub const STEPS_PER_CPU_SECOND: u64 = 20_000_000;

#[derive(Debug)]
pub struct InProcessExecutor {
    slots: Semaphore,
}

impl Default for InProcessExecutor {
    fn default() -> Self {
        Self::new(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }
}

impl InProcessExecutor {
    pub fn new(workers: usize) -> Self {
        Self { slots: Semaphore::new(workers.max(1)) }
    }
}

impl Executor for InProcessExecutor {
    fn execute(&self, request: &WireRequest, limits: &ResourceLimits) -> Result<SandboxVerdict, SandboxError> {
        let _slot = self.slots.acquire();
        let budget = Budget {
            fuel: Some((limits.cpu_timeout.as_secs_f64() * STEPS_PER_CPU_SECOND as f64) as u64),
            deadline: Some(Instant::now() + limits.wall_timeout),
            memory: usize::try_from(limits.memory_cap).unwrap_or(usize::MAX),
        };
        let response = minipy::serve_once(&wire::encode(request), budget);
        if response.len() as u64 > limits.output_cap {
            return Ok(SandboxVerdict::failed(
                SandboxStatus::ProtocolError,
                format!("output exceeded {} bytes", limits.output_cap),
            ));
        }
        Ok(match wire::decode_response(&response) {
            Ok(response) => SandboxVerdict::from_response(response),
            Err(e) => SandboxVerdict::failed(SandboxStatus::ProtocolError, e.to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;

    #[test]
    fn executes_and_caps_output() {
        let executor = InProcessExecutor::new(2);
        let limits = ResourceLimits::default();
        let request = WireRequest::new("def f(n):\n    return 'x' * n\n", "f", "[3]");
        assert_eq!(executor.execute(&request, &limits).unwrap(), SandboxVerdict::ok("'xxx'"));

        let tight = ResourceLimits { output_cap: 64, ..limits };
        let request = WireRequest::new("def f(n):\n    return 'x' * n\n", "f", "[1000]");
        let verdict = executor.execute(&request, &tight).unwrap();
        assert_eq!(verdict.status, SandboxStatus::ProtocolError);
    }

    #[test]
    fn cpu_budget_bounds_loops() {
        let executor = InProcessExecutor::new(1);
        let limits = ResourceLimits {
            cpu_timeout: Duration::from_millis(50),
            wall_timeout: Duration::from_secs(5),
            ..ResourceLimits::default()
        };
        let request = WireRequest::new("def f():\n    i = 0\n    while True:\n        i += 1\n", "f", "[]");
        assert_eq!(executor.execute(&request, &limits).unwrap().status, SandboxStatus::Timeout);
    }
}
