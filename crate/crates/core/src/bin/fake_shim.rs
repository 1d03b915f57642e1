//! Stand-in for the Python runner shim: reads one framed request from stdin,
//! evaluates it with the bundled interpreter and writes one framed response
//! to stdout. Resource limits come from the parent via rlimits.

use std::io::{Read, Write};

use pat_core::sandbox::minipy::{self, Budget};

/// Address space the interpreter thread stack and runtime need beyond the heap.
const RESERVED: usize = 192 << 20;
const SHIM_STACK: usize = 128 << 20;

fn address_space_limit() -> Option<usize> {
    let mut limit = libc::rlimit { rlim_cur: 0, rlim_max: 0 };
    // SAFETY: getrlimit only writes to the provided struct.
    let rc = unsafe { libc::getrlimit(libc::RLIMIT_AS, &mut limit) };
    (rc == 0 && limit.rlim_cur != libc::RLIM_INFINITY).then_some(limit.rlim_cur as usize)
}

fn main() {
    let mut request = Vec::new();
    if std::io::stdin().read_to_end(&mut request).is_err() {
        std::process::exit(2);
    }
    let memory = match address_space_limit() {
        Some(limit) => limit.saturating_sub(RESERVED).max(16 << 20) / 2,
        None => 1 << 30,
    };
    let budget = Budget { fuel: None, deadline: None, memory };
    let response = minipy::serve_once_with_stack(&request, budget, SHIM_STACK);
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(&response);
    let _ = out.flush();
}
