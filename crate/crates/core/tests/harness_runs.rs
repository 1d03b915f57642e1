//! Benchmark runs over the scripted smoke fixture.

use std::path::{Path, PathBuf};

use rust_decimal::Decimal;

use pat_core::harness::run::RunError;
use pat_core::harness::store::StoreError;
use pat_core::harness::{
    load_dataset, parse_dataset, report_for, run_benchmark, DatasetError, DatasetFormat, RunConfig, RunReport,
    RunStore,
};
use pat_core::policy::SolveTrace;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/smoke")
}

fn config(name: &str) -> RunConfig {
    RunConfig::load(&fixtures().join(name)).unwrap()
}

fn run(config: &RunConfig, out: &Path) -> RunReport {
    let dataset = load_dataset(&fixtures().join("dataset.jsonl"), DatasetFormat::LinesV1).unwrap();
    run_benchmark(config, &dataset, "dataset.jsonl", out, false).unwrap()
}

/// Compares against a checked-in report; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "report schema or content changed; rerun with UPDATE_GOLDEN=1 if intended");
}

#[test]
fn reports_match_golden_files() {
    let tmp = tempfile::tempdir().unwrap();
    golden("smoke_pat.json", &run(&config("pat.toml"), &tmp.path().join("pat")).to_json());
    golden("smoke_standard.json", &run(&config("standard.toml"), &tmp.path().join("std")).to_json());
}

#[test]
fn concurrency_does_not_change_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let mut serial = config("pat.toml");
    serial.concurrency = 1;
    let a = run(&serial, &tmp.path().join("serial"));
    let b = run(&config("pat.toml"), &tmp.path().join("parallel"));
    assert_eq!(a.to_json(), b.to_json());
}

fn trace_cost(trace: &SolveTrace) -> Decimal {
    trace.cost
}

#[test]
fn ledger_is_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("pat");
    let report = run(&config("pat.toml"), &dir);
    let records = RunStore::read_records(&dir).unwrap();
    let mut total = Decimal::ZERO;
    for r in &records {
        let from_calls: Decimal = r.costs.iter().map(|c| c.usd).sum();
        assert_eq!(r.usd, from_calls, "{}", r.id);
        assert_eq!(trace_cost(&r.trace), r.usd, "{}", r.id);
        assert_eq!(r.trace.iteration_cost(), r.usd, "{}", r.id);
        total += r.usd;
    }
    assert_eq!(report.total_usd, total);
}

#[test]
fn prompts_never_contain_hidden_tests() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run(&config("pat.toml"), &tmp.path().join("pat"));
    assert_eq!(report.leaked_prompts, 0);

    // a description that quotes a hidden assertion is caught
    let text = std::fs::read_to_string(fixtures().join("dataset.jsonl"))
        .unwrap()
        .replacen("Return the sum of $a$ and $b$", "Return the sum, e.g. add(120, 5) == 125", 1);
    let leaky = parse_dataset(&text, DatasetFormat::LinesV1).unwrap();
    let dir = tmp.path().join("leaky");
    let mut cfg = config("standard.toml");
    cfg.concurrency = 1;
    // the changed description does not affect keyed replay
    let report = run_benchmark(&cfg, &leaky, "leaky.jsonl", &dir, false).unwrap();
    assert!(report.leaked_prompts >= 1, "{}", report.leaked_prompts);
}

#[test]
fn run_directories_are_guarded() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("pat");
    run(&config("pat.toml"), &dir);
    let dataset = load_dataset(&fixtures().join("dataset.jsonl"), DatasetFormat::LinesV1).unwrap();
    let again = run_benchmark(&config("pat.toml"), &dataset, "dataset.jsonl", &dir, false);
    assert!(matches!(again, Err(RunError::Store(StoreError::NotEmpty(_)))));
    let other_mode = run_benchmark(&config("standard.toml"), &dataset, "dataset.jsonl", &dir, true);
    assert!(matches!(other_mode, Err(RunError::Store(StoreError::Mismatch(_)))));
    // resuming a finished run is a no-op
    let resumed = run_benchmark(&config("pat.toml"), &dataset, "dataset.jsonl", &dir, true).unwrap();
    assert_eq!(resumed.to_json(), report_for(&dir, Some(&dataset)).unwrap().to_json());
    assert_eq!(RunStore::read_records(&dir).unwrap().len(), 10);
}

#[test]
fn per_problem_errors_do_not_abort_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = std::fs::read_to_string(fixtures().join("dataset.jsonl")).unwrap();
    text.push_str(
        r#"{"id": "unscripted", "description": "Return x", "entry_point": "ident(x: int) -> int", "provided_examples": ["assert ident(1) == 1"], "hidden_tests": ["assert ident(2) == 2"]}"#,
    );
    text.push('\n');
    let dataset = parse_dataset(&text, DatasetFormat::LinesV1).unwrap();
    let report = run_benchmark(&config("pat.toml"), &dataset, "extended.jsonl", &tmp.path().join("x"), false).unwrap();
    assert_eq!(report.problems, 11);
    assert_eq!(report.passed, 10);
    let failed = report.per_problem.iter().find(|p| p.id == "unscripted").unwrap();
    assert_eq!(failed.outcome, "error");
    assert!(failed.error.as_deref().unwrap_or("").contains("transport"), "{failed:?}");
}

#[test]
fn baseline_normalization() {
    let tmp = tempfile::tempdir().unwrap();
    let standard = run(&config("standard.toml"), &tmp.path().join("std"));
    let pat = run(&config("pat.toml"), &tmp.path().join("pat"));
    let itself = standard.clone().with_baseline("standard", &standard).unwrap();
    assert_eq!(itself.normalized_cost, Some(1.0));
    assert_eq!(itself.roi, None, "ROI is undefined at cost 1");
    let pat = pat.with_baseline("standard", &standard).unwrap();
    let cost = pat.normalized_cost.unwrap();
    assert!(cost > 1.0);
    let roi = pat.roi.unwrap();
    assert!((roi - 30.0 / (cost - 1.0)).abs() < 1e-9, "{roi}");
    // s09 and s10 pass their visible examples but not the hidden suite
    assert_eq!(standard.outcomes.get("trial_failure"), Some(&1));
    assert_eq!(standard.passed, 7);
}

#[test]
fn dataset_format_errors_carry_line_numbers() {
    let good = r#"{"id": "a", "description": "d", "entry_point": "f(x)", "hidden_tests": ["assert f(1) == 1"]}"#;
    let missing = r#"{"id": "b", "description": "d", "hidden_tests": ["assert f(1) == 1"]}"#;
    let stdio = r#"{"id": "c", "description": "d", "entry_point": "main()", "stdio": true}"#;
    let err = parse_dataset(&format!("{good}\n\n{missing}\n"), DatasetFormat::LinesV1).unwrap_err();
    assert!(matches!(err, DatasetError::Format { line: 3, .. }), "{err}");
    let ds = parse_dataset(&format!("{good}\n{stdio}\n"), DatasetFormat::LinesV1).unwrap();
    assert_eq!((ds.len(), ds.skipped_stdio), (1, 1));
}
