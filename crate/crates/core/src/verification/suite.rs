//! Test-suite construction and its line-delimited cache format.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::assertions::{parse_assertions, Provenance, Skipped, TestCase};
use super::literal::Literal;
use crate::policy::ProblemSpec;

pub const DEFAULT_MAX_SUITE_SIZE: usize = 8;
pub const DEFAULT_SUB_SUITE_SIZE: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub problem_id: String,
    pub entry_point: String,
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Re-renders generated cases as assertion text, one per line.
    pub fn generated_text(&self) -> String {
        self.cases
            .iter()
            .filter(|c| c.provenance == Provenance::Generated)
            .map(|c| c.canonical(&self.entry_point))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn to_jsonl(&self) -> String {
        self.cases
            .iter()
            .map(|c| {
                let record = SuiteRecord {
                    problem_id: self.problem_id.clone(),
                    entry_point: self.entry_point.clone(),
                    raw: c.raw.clone(),
                    provenance: c.provenance,
                    args: c.args_list(),
                    expected: c.expected.render(),
                };
                serde_json::to_string(&record).expect("suite record serializes") + "\n"
            })
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<TestSuite, SuiteError> {
        let mut suite: Option<TestSuite> = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |message: String| SuiteError::Format { line: i + 1, message };
            let record: SuiteRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let call_args = match Literal::parse(&record.args).map_err(|e| bad(e.to_string()))? {
                Literal::List(items) => items,
                _ => return Err(bad("args must be a list literal".into())),
            };
            let expected = Literal::parse(&record.expected).map_err(|e| bad(e.to_string()))?;
            let suite = suite.get_or_insert_with(|| TestSuite {
                problem_id: record.problem_id.clone(),
                entry_point: record.entry_point.clone(),
                cases: Vec::new(),
            });
            if suite.problem_id != record.problem_id {
                return Err(bad(format!("mixed problem ids {} and {}", suite.problem_id, record.problem_id)));
            }
            suite.cases.push(TestCase { call_args, expected, provenance: record.provenance, raw: record.raw });
        }
        suite.ok_or(SuiteError::Empty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SuiteRecord {
    problem_id: String,
    entry_point: String,
    raw: String,
    provenance: Provenance,
    args: String,
    expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuiteError {
    #[error("test suite is empty")]
    Empty,
    #[error("suite record at line {line}: {message}")]
    Format { line: usize, message: String },
}

/// A suite plus the assertions that had to be dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltSuite {
    pub suite: TestSuite,
    pub skipped: Vec<Skipped>,
    pub duplicates: usize,
    pub truncated: usize,
}

/// Provided examples first, then generated assertions; duplicates removed
/// and the total capped at `max_size`.
pub fn build_suite(problem: &ProblemSpec, raw_generated: &str, max_size: usize) -> Result<BuiltSuite, SuiteError> {
    let name = problem.name();
    let mut skipped = Vec::new();
    let mut provided = Vec::new();
    for example in &problem.provided_examples {
        let parsed = parse_assertions(example, name, Provenance::Provided);
        provided.extend(parsed.cases);
        skipped.extend(parsed.skipped);
    }
    let generated = parse_assertions(raw_generated, name, Provenance::Generated);
    skipped.extend(generated.skipped);

    let mut seen = HashSet::new();
    let mut cases = Vec::new();
    let mut duplicates = 0;
    let mut truncated = 0;
    for case in provided.into_iter().chain(generated.cases) {
        if !seen.insert(case.key()) {
            duplicates += 1;
        } else if cases.len() >= max_size {
            truncated += 1;
        } else {
            cases.push(case);
        }
    }
    if cases.is_empty() {
        return Err(SuiteError::Empty);
    }
    Ok(BuiltSuite {
        suite: TestSuite { problem_id: problem.id.clone(), entry_point: name.to_string(), cases },
        skipped,
        duplicates,
        truncated,
    })
}
