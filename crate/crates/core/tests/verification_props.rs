//! Invariants of assertion parsing and strict evaluation.

use proptest::prelude::*;

use pat_core::policy::{compose, FunctionImpl, HelperSet, Origin, Program};
use pat_core::sandbox::{InProcessExecutor, ResourceLimits};
use pat_core::verification::{evaluate, is_success, parse_assertions, Literal, Provenance, TestSuite, TestVerdict};

fn literal() -> impl Strategy<Value = Literal> {
    let leaf = prop_oneof![
        Just(Literal::None),
        any::<bool>().prop_map(Literal::Bool),
        any::<i64>().prop_map(Literal::Int),
        any::<f64>().prop_map(Literal::Float),
        "\\PC{0,6}".prop_map(Literal::Str),
    ];
    leaf.prop_recursive(2, 12, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..3).prop_map(Literal::List),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Literal::Tuple),
            prop::collection::btree_map("[a-z]{1,3}", inner, 0..3)
                .prop_map(|m| Literal::Dict(m.into_iter().map(|(k, v)| (Literal::Str(k), v)).collect())),
        ]
    })
}

fn program(source: &str) -> Program {
    compose(&FunctionImpl::new("f", source, "f", Origin::Trial), &HelperSet::new()).unwrap()
}

fn suite(text: &str) -> TestSuite {
    TestSuite { problem_id: "p".into(), entry_point: "f".into(), cases: parse_assertions(text, "f", Provenance::Generated).cases }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn canonical_assertions_reparse_identically(
        args in prop::collection::vec(literal(), 0..3),
        expected in literal(),
    ) {
        let rendered: Vec<String> = args.iter().map(Literal::render).collect();
        let line = format!("assert f({}) == {}", rendered.join(", "), expected.render());
        let parsed = parse_assertions(&line, "f", Provenance::Generated);
        prop_assert_eq!(parsed.cases.len(), 1, "{:?}", parsed.skipped);
        let case = &parsed.cases[0];
        prop_assert_eq!(case.canonical("f"), line.clone());
        let again = parse_assertions(&case.canonical("f"), "f", Provenance::Generated);
        prop_assert_eq!(again.cases[0].key(), case.key());
    }

    #[test]
    fn identity_passes_on_every_literal(value in literal()) {
        let executor = InProcessExecutor::new(1);
        let s = suite(&format!("assert f({0}) == {0}", value.render()));
        let prog = program("def f(x):\n    return x\n");
        let result = evaluate(&executor, &prog, &s, &ResourceLimits::default()).unwrap();
        prop_assert_eq!(result.verdicts, vec![TestVerdict::Pass]);
    }

    #[test]
    fn success_requires_every_case(
        a in -20i64..20,
        b in -20i64..20,
        cases in prop::collection::vec((-100i64..100, proptest::option::weighted(0.2, 1i64..5)), 1..8),
    ) {
        let executor = InProcessExecutor::new(4);
        let text: Vec<String> = cases
            .iter()
            .map(|(x, off)| format!("assert f({x}) == {}", a * x + b + off.unwrap_or(0)))
            .collect();
        let s = suite(&text.join("\n"));
        let prog = program(&format!("def f(x):\n    return {a} * x + {b}\n"));
        let result = evaluate(&executor, &prog, &s, &ResourceLimits::default()).unwrap();
        let correct = cases.iter().filter(|(_, off)| off.is_none()).count();
        prop_assert_eq!(result.pass_count, correct);
        prop_assert_eq!(result.count(TestVerdict::WrongOutput), cases.len() - correct);
        prop_assert_eq!(is_success(&result, &s), correct == cases.len());
    }
}

#[test]
fn empty_suites_never_succeed() {
    let executor = InProcessExecutor::new(1);
    let s = suite("");
    let result = evaluate(&executor, &program("def f(x):\n    return x\n"), &s, &ResourceLimits::default()).unwrap();
    assert!(!is_success(&result, &s));
}
