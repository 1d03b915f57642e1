//! Running a program against a suite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::suite::TestSuite;
use crate::policy::Program;
use crate::sandbox::{run_case, verdict_to_test_verdict, Executor, ResourceLimits, SandboxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestVerdict {
    Pass,
    WrongOutput,
    Exception,
    Timeout,
    Memory,
    UnresolvedName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalResult {
    pub verdicts: Vec<TestVerdict>,
    pub pass_count: usize,
}

impl EvalResult {
    pub fn from_verdicts(verdicts: Vec<TestVerdict>) -> Self {
        let pass_count = verdicts.iter().filter(|v| **v == TestVerdict::Pass).count();
        Self { verdicts, pass_count }
    }

    pub fn count(&self, verdict: TestVerdict) -> usize {
        self.verdicts.iter().filter(|v| **v == verdict).count()
    }
}

/// Runs every case (never short-circuiting), each in its own sandbox
/// invocation. Cases fan out in parallel; verdicts keep suite order.
pub fn evaluate(
    executor: &dyn Executor,
    program: &Program,
    suite: &TestSuite,
    limits: &ResourceLimits,
) -> Result<EvalResult, SandboxError> {
    let verdicts = suite
        .cases
        .par_iter()
        .map(|case| {
            let verdict = run_case(executor, program, case, limits)?;
            Ok(verdict_to_test_verdict(&verdict, &case.expected))
        })
        .collect::<Result<Vec<_>, SandboxError>>()?;
    Ok(EvalResult::from_verdicts(verdicts))
}

/// Strict acceptance: every case passes.
pub fn is_success(result: &EvalResult, suite: &TestSuite) -> bool {
    !suite.is_empty() && result.pass_count == suite.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{compose, FunctionImpl, HelperSet, Origin, ProblemSpec};
    use crate::sandbox::InProcessExecutor;
    use crate::verification::build_suite;

    fn program(source: &str) -> Program {
        compose(&FunctionImpl::new("add", source, "add", Origin::Trial), &HelperSet::new()).unwrap()
    }

    fn suite(n: i64) -> TestSuite {
        let problem = ProblemSpec {
            id: "add".into(),
            description: "add".into(),
            entry_point: "add(a, b)".parse().unwrap(),
            provided_examples: Vec::new(),
            difficulty: None,
            depth: 0,
        };
        let raw: Vec<String> = (0..n).map(|i| format!("assert add({i}, {i}) == {}", 2 * i)).collect();
        build_suite(&problem, &raw.join("\n"), 8).unwrap().suite
    }

    #[test]
    fn five_of_six_is_not_success() {
        let executor = InProcessExecutor::new(2);
        let suite = suite(6);
        let off = program("def add(a, b):\n    return a + b if a != 5 else 0\n");
        let result = evaluate(&executor, &off, &suite, &ResourceLimits::default()).unwrap();
        assert_eq!(result.pass_count, 5);
        assert_eq!(result.verdicts[5], TestVerdict::WrongOutput);
        assert!(!is_success(&result, &suite));

        let good = program("def add(a, b):\n    return a + b\n");
        let result = evaluate(&executor, &good, &suite, &ResourceLimits::default()).unwrap();
        assert!(is_success(&result, &suite));
    }

    #[test]
    fn crashes_score_zero() {
        let executor = InProcessExecutor::new(2);
        let suite = suite(4);
        let bad = program("def add(a, b):\n    raise ValueError('no')\n");
        let result = evaluate(&executor, &bad, &suite, &ResourceLimits::default()).unwrap();
        assert_eq!(result.pass_count, 0);
        assert!(result.verdicts.iter().all(|v| *v == TestVerdict::Exception));
    }
}
