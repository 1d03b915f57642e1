//! A small, self-contained interpreter for the Python subset that candidate
//! programs are written in. It backs the host-side executors so that the
//! pipeline runs without a Python installation.
//!
//! Differences from CPython that matter for candidates: integers are 64-bit
//! (overflow raises `OverflowError`), generators run eagerly, `keys()` /
//! `values()` / `items()` return lists, and classes, `with` and `re` are not
//! available.

mod ast;
mod builtins;
mod interp;
mod lexer;
mod methods;
mod ops;
mod parser;
mod value;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use super::wire::{self, WireRequest, WireResponse, WireStatus, WIRE_VERSION};
use crate::verification::literal::Literal;
use interp::Interp;
use value::{set_heap_limit, Flow, Value};

/// Native stack for interpreter threads; deep Python recursion maps onto it.
pub const INTERPRETER_STACK: usize = 256 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxErr {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for SyntaxErr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SyntaxError: {} (line {})", self.message, self.line)
    }
}

/// Resources one call may consume.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    /// Interpreter steps before the call counts as timed out.
    pub fuel: Option<u64>,
    pub deadline: Option<Instant>,
    /// Bytes of interpreter heap.
    pub memory: usize,
}

/// Checks that `source` parses.
pub fn check_syntax(source: &str) -> Result<(), SyntaxErr> {
    parser::parse_module(source).map(drop)
}

/// Runs `entry_point(*args)` after executing the module `source`, on the
/// current thread. Use [`run_call`] unless the thread stack is already large.
pub fn run_call_here(source: &str, entry_point: &str, args: &str, budget: Budget) -> WireResponse {
    let outcome = catch_unwind(AssertUnwindSafe(|| evaluate(source, entry_point, args, budget)));
    set_heap_limit(usize::MAX);
    outcome.unwrap_or_else(|_| WireResponse::failure(WireStatus::ProtocolError, "interpreter fault"))
}

/// Like [`run_call_here`], on a dedicated thread with [`INTERPRETER_STACK`].
pub fn run_call(source: &str, entry_point: &str, args: &str, budget: Budget) -> WireResponse {
    run_call_with_stack(source, entry_point, args, budget, INTERPRETER_STACK)
}

pub fn run_call_with_stack(source: &str, entry_point: &str, args: &str, budget: Budget, stack: usize) -> WireResponse {
    let (source, entry_point, args) = (source.to_string(), entry_point.to_string(), args.to_string());
    let spawned = std::thread::Builder::new()
        .name("minipy".into())
        .stack_size(stack)
        .spawn(move || run_call_here(&source, &entry_point, &args, budget));
    match spawned {
        Ok(handle) => handle
            .join()
            .unwrap_or_else(|_| WireResponse::failure(WireStatus::ProtocolError, "interpreter fault")),
        Err(e) => WireResponse::failure(WireStatus::ProtocolError, format!("cannot start interpreter: {e}")),
    }
}

/// Serves one framed request, returning one framed response.
pub fn serve_once(request: &[u8], budget: Budget) -> Vec<u8> {
    serve_once_with_stack(request, budget, INTERPRETER_STACK)
}

pub fn serve_once_with_stack(request: &[u8], budget: Budget, stack: usize) -> Vec<u8> {
    let response = match wire::decode::<WireRequest>(request) {
        Err(e) => WireResponse::failure(WireStatus::ProtocolError, e.to_string()),
        Ok(req) if req.version != WIRE_VERSION => WireResponse::failure(
            WireStatus::ProtocolError,
            format!("wire version {}, expected {WIRE_VERSION}", req.version),
        ),
        Ok(req) => run_call_with_stack(&req.source, &req.entry_point, &req.args, budget, stack),
    };
    wire::encode(&response)
}

fn evaluate(source: &str, entry_point: &str, args: &str, budget: Budget) -> WireResponse {
    let module = match parser::parse_module(source) {
        Ok(m) => m,
        Err(e) => return WireResponse::failure(WireStatus::Exception, e.to_string()),
    };
    let args = match Literal::parse(args) {
        Ok(Literal::List(items)) => items,
        Ok(_) => return WireResponse::failure(WireStatus::ProtocolError, "args must be a list literal"),
        Err(e) => return WireResponse::failure(WireStatus::ProtocolError, format!("bad args literal: {e}")),
    };
    set_heap_limit(budget.memory);
    let mut interp = Interp::new(budget.fuel, budget.deadline);
    let result = (|| {
        let args = args.iter().map(Value::from_literal).collect::<Result<Vec<_>, _>>()?;
        interp.run_module(&module)?;
        let func = interp.lookup(entry_point, &interp.globals.clone())?;
        let value = interp.call(&func, args, Vec::new())?;
        Ok(match value.to_literal() {
            Some(lit) => lit.render(),
            None => value.repr(),
        })
    })();
    let response = match result {
        Ok(text) => WireResponse::ok(text),
        Err(Flow::Exc(e)) => WireResponse::failure(WireStatus::Exception, e.describe()),
        Err(Flow::Timeout) => WireResponse::failure(WireStatus::Timeout, "step budget or deadline exhausted"),
        Err(Flow::Memory) => WireResponse::failure(WireStatus::Memory, "MemoryError"),
        Err(Flow::Return(_) | Flow::Break | Flow::Continue) => {
            WireResponse::failure(WireStatus::Exception, "SyntaxError: control flow outside function")
        }
    };
    drop(interp);
    response
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> Budget {
        Budget { fuel: Some(5_000_000), deadline: None, memory: 64 << 20 }
    }

    fn call(source: &str, args: &str) -> WireResponse {
        run_call(source, "f", args, budget())
    }

    #[test]
    fn returns_canonical_literals() {
        let r = call("def f(a, b):\n    return {'b': [a, b], 'a': (a,)}\n", "[1, 2.5]");
        assert_eq!(r.status, WireStatus::Ok);
        assert_eq!(r.value.as_deref(), Some("{'a': (1,), 'b': [1, 2.5]}"));
    }

    #[test]
    fn exception_tail_starts_with_type() {
        let r = call("def f(x):\n    return x[3]\n", "[[1]]");
        assert_eq!(r.status, WireStatus::Exception);
        assert!(r.stderr_tail.starts_with("IndexError"), "{}", r.stderr_tail);
        let r = call("def f():\n    return helper()\n", "[]");
        assert!(r.stderr_tail.starts_with("NameError"), "{}", r.stderr_tail);
    }

    #[test]
    fn infinite_loop_times_out() {
        let r = call("def f():\n    while True:\n        pass\n", "[]");
        assert_eq!(r.status, WireStatus::Timeout);
    }

    #[test]
    fn allocation_bomb_hits_memory() {
        let r = call("def f():\n    x = []\n    while True:\n        x.append([0] * 1000)\n", "[]");
        assert_eq!(r.status, WireStatus::Memory);
    }

    #[test]
    fn syntax_errors_are_exceptions() {
        let r = call("def f(:\n", "[]");
        assert_eq!(r.status, WireStatus::Exception);
        assert!(r.stderr_tail.starts_with("SyntaxError"));
    }

    #[test]
    fn serve_once_round_trip() {
        let req = wire::encode(&WireRequest::new("def f(x):\n    return x * 2\n", "f", "[21]"));
        let resp: WireResponse = wire::decode(&serve_once(&req, budget())).unwrap();
        assert_eq!(resp, WireResponse::ok("42"));
        let resp: WireResponse = wire::decode(&serve_once(b"garbage", budget())).unwrap();
        assert_eq!(resp.status, WireStatus::ProtocolError);
    }
}
