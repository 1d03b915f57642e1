//! Test suites, assertion parsing and the strict acceptance criterion.

pub mod assertions;
pub mod evaluate;
pub mod literal;
pub mod suite;

pub use assertions::{parse_assertions, ParsedAssertions, Provenance, SkipReason, Skipped, TestCase};
pub use evaluate::{evaluate, is_success, EvalResult, TestVerdict};
pub use literal::Literal;
pub use suite::{build_suite, BuiltSuite, SuiteError, TestSuite, DEFAULT_MAX_SUITE_SIZE, DEFAULT_SUB_SUITE_SIZE};
