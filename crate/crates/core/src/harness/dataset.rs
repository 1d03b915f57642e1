//! Benchmark datasets in the `lines_v1` format: one JSON object per line.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{Difficulty, EntryPoint, ProblemSpec};
use crate::verification::{parse_assertions, Provenance, TestSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    #[default]
    LinesV1,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    description: String,
    entry_point: String,
    #[serde(default)]
    provided_examples: Vec<String>,
    #[serde(default)]
    hidden_tests: Vec<String>,
    #[serde(default)]
    difficulty: Option<Difficulty>,
    /// Competition problems that read stdin and print to stdout.
    #[serde(default)]
    stdio: bool,
}

/// A problem plus its hidden evaluation tests, which are kept apart from
/// the `ProblemSpec` so that no code path can hand them to a model.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchProblem {
    pub spec: ProblemSpec,
    hidden: TestSuite,
}

impl BenchProblem {
    pub fn new(spec: ProblemSpec, hidden: TestSuite) -> Self {
        Self { spec, hidden }
    }

    /// The scoring suite, namespaced apart from self-verification suites.
    pub fn hidden_suite(&self) -> &TestSuite {
        &self.hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub problems: Vec<BenchProblem>,
    /// Stdio-style records that were skipped.
    pub skipped_stdio: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }
}

pub fn hidden_namespace(id: &str) -> String {
    format!("hidden/{id}")
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_dataset(&text, format)
}

pub fn parse_dataset(text: &str, format: DatasetFormat) -> Result<Dataset, DatasetError> {
    let DatasetFormat::LinesV1 = format;
    let mut problems = Vec::new();
    let mut skipped_stdio = 0;
    let mut ids = HashSet::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fail = |message: String| DatasetError::Format { line, message };
        let record: Record = serde_json::from_str(raw).map_err(|e| fail(e.to_string()))?;
        if record.stdio {
            skipped_stdio += 1;
            continue;
        }
        if !ids.insert(record.id.clone()) {
            return Err(fail(format!("duplicate id {:?}", record.id)));
        }
        let entry_point: EntryPoint = record.entry_point.parse().map_err(|e| fail(format!("entry_point: {e}")))?;
        let parsed = parse_assertions(&record.hidden_tests.join("\n"), &entry_point.name, Provenance::Provided);
        if parsed.cases.is_empty() {
            return Err(fail(format!("no usable hidden tests for {:?}", record.id)));
        }
        let hidden = TestSuite {
            problem_id: hidden_namespace(&record.id),
            entry_point: entry_point.name.clone(),
            cases: parsed.cases,
        };
        let spec = ProblemSpec {
            id: record.id,
            description: record.description,
            entry_point,
            provided_examples: record.provided_examples,
            difficulty: record.difficulty,
            depth: 0,
        };
        problems.push(BenchProblem { spec, hidden });
    }
    Ok(Dataset { problems, skipped_stdio })
}
