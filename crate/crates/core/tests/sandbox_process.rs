//! Out-of-process execution through the runner wire protocol.

use std::path::{Path, PathBuf};
use std::time::Duration;

use pat_core::sandbox::{Executor, InterpreterConfig, ProcessExecutor, ResourceLimits, SandboxStatus, WireRequest};
use pat_core::verification::literal::Literal;

fn limits() -> ResourceLimits {
    ResourceLimits {
        wall_timeout: Duration::from_secs(3),
        cpu_timeout: Duration::from_secs(1),
        ..ResourceLimits::default()
    }
}

fn fake_shim() -> ProcessExecutor {
    let mut config = InterpreterConfig::with_interpreter(env!("CARGO_BIN_EXE_pat-fake-shim"));
    config.isolate_network = false;
    ProcessExecutor::new(&config).unwrap()
}

fn python_shim() -> Option<ProcessExecutor> {
    let python = ["/usr/bin/python3", "/usr/local/bin/python3"].into_iter().map(PathBuf::from).find(|p| p.exists())?;
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../runner-shim/runner_shim.py");
    let mut config = InterpreterConfig::with_interpreter(python);
    config.args = vec!["-I".into(), script.canonicalize().ok()?.display().to_string()];
    config.isolate_network = false;
    Some(ProcessExecutor::new(&config).unwrap())
}

fn run(executor: &ProcessExecutor, source: &str, args: &str, limits: &ResourceLimits) -> (SandboxStatus, String) {
    let verdict = executor.execute(&WireRequest::new(source, "f", args), limits).unwrap();
    match verdict.status {
        SandboxStatus::Ok => (verdict.status, verdict.value_text.unwrap()),
        _ => (verdict.status, verdict.stderr_tail),
    }
}

/// Crash archetypes shared by both shims: source, expected status, prefix of
/// the diagnostic tail.
const CRASHES: &[(&str, SandboxStatus, &str)] = &[
    ("def f():\n    return 1 // 0\n", SandboxStatus::Exception, "ZeroDivisionError"),
    ("def f():\n    return [][0]\n", SandboxStatus::Exception, "IndexError"),
    ("def f():\n    return {}['k']\n", SandboxStatus::Exception, "KeyError"),
    ("def f():\n    return missing()\n", SandboxStatus::Exception, "NameError"),
    ("def f():\n    return int('x')\n", SandboxStatus::Exception, "ValueError"),
    ("def f():\n    return 1 + 'a'\n", SandboxStatus::Exception, "TypeError"),
    ("def f():\n    assert False\n", SandboxStatus::Exception, "AssertionError"),
    ("def f():\n    raise RuntimeError('boom')\n", SandboxStatus::Exception, "RuntimeError"),
    ("def f(:\n", SandboxStatus::Exception, "SyntaxError"),
    ("def f():\n    return f()\n", SandboxStatus::Exception, "RecursionError"),
    ("def f():\n    while True:\n        pass\n", SandboxStatus::Timeout, ""),
    ("def f():\n    x = []\n    while True:\n        x.append([0] * 100000)\n", SandboxStatus::Memory, ""),
];

fn check_crashes(executor: &ProcessExecutor) {
    for (source, status, prefix) in CRASHES {
        let (got, tail) = run(executor, source, "[]", &limits());
        assert_eq!(got, *status, "{source:?}: {tail}");
        assert!(tail.trim_start().starts_with(prefix), "{source:?}: {tail}");
    }
}

const LITERALS: &[&str] = &[
    "0",
    "-7",
    "9223372036854775807",
    "2.5",
    "-0.0",
    "1e+100",
    "inf",
    "True",
    "None",
    "'it\\'s'",
    "\"a\\nb\"",
    "[]",
    "()",
    "(1,)",
    "[1, [2, (3, 'x')]]",
    "{'b': 1, 'a': [None, False]}",
    "{}",
];

fn check_literals(executor: &ProcessExecutor) {
    for text in LITERALS {
        let literal = Literal::parse(text).unwrap();
        let args = format!("[{}]", literal.render());
        let (status, value) = run(executor, "def f(x):\n    return x\n", &args, &limits());
        assert_eq!(status, SandboxStatus::Ok, "{text}: {value}");
        assert_eq!(value, literal.render(), "{text}");
        assert!(Literal::parse(&value).unwrap().output_eq(&literal), "{text}");
    }
}

#[test]
fn fake_shim_encodes_crashes() {
    check_crashes(&fake_shim());
}

#[test]
fn fake_shim_round_trips_literals() {
    check_literals(&fake_shim());
}

#[test]
fn wall_clock_limit_kills_sleepers() {
    let executor = fake_shim();
    let tight = ResourceLimits { wall_timeout: Duration::from_millis(300), cpu_timeout: Duration::from_millis(200), ..limits() };
    let started = std::time::Instant::now();
    let (status, _) = run(&executor, "def f():\n    while True:\n        pass\n", "[]", &tight);
    assert_eq!(status, SandboxStatus::Timeout);
    assert!(started.elapsed() < Duration::from_secs(3));
}

#[test]
fn output_cap_is_enforced() {
    let executor = fake_shim();
    let small = ResourceLimits { output_cap: 256, ..limits() };
    let (status, _) = run(&executor, "def f():\n    return 'x' * 10000\n", "[]", &small);
    assert_eq!(status, SandboxStatus::ProtocolError);
    let (status, value) = run(&executor, "def f():\n    return 'x' * 10\n", "[]", &small);
    assert_eq!((status, value.as_str()), (SandboxStatus::Ok, "'xxxxxxxxxx'"));
}

#[test]
fn concurrent_requests_are_isolated() {
    let executor = fake_shim();
    std::thread::scope(|s| {
        for i in 0..16i64 {
            let executor = &executor;
            s.spawn(move || {
                let source = format!("STATE = [{i}]\ndef f(x):\n    STATE.append(x)\n    return STATE\n");
                let (status, value) = run(executor, &source, &format!("[{}]", i * 10), &limits());
                assert_eq!(status, SandboxStatus::Ok);
                assert_eq!(value, format!("[{i}, {}]", i * 10));
            });
        }
    });
}

#[test]
fn python_shim_encodes_crashes() {
    let Some(executor) = python_shim() else {
        eprintln!("python3 not available; skipping");
        return;
    };
    check_crashes(&executor);
}

#[test]
fn python_shim_round_trips_literals() {
    let Some(executor) = python_shim() else {
        eprintln!("python3 not available; skipping");
        return;
    };
    check_literals(&executor);
    // printing from the candidate does not corrupt the response frame
    let (status, value) = run(&executor, "def f():\n    print('noise' * 100)\n    return 3\n", "[]", &limits());
    assert_eq!((status, value.as_str()), (SandboxStatus::Ok, "3"));
}
