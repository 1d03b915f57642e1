//! Audit that hidden evaluation tests never reach a model.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::dataset::BenchProblem;
use crate::gateway::PromptLog;
use crate::verification::{parse_assertions, Provenance};

fn squash(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Whitespace-free `name(args)==expected` forms of every hidden case that
/// is not also a provided example (those are public by definition).
pub fn hidden_fingerprints(problem: &BenchProblem) -> Vec<String> {
    let name = problem.spec.name();
    let public: HashSet<_> = problem
        .spec
        .provided_examples
        .iter()
        .flat_map(|e| parse_assertions(e, name, Provenance::Provided).cases)
        .map(|c| c.key())
        .collect();
    let mut out = Vec::new();
    for case in &problem.hidden_suite().cases {
        if public.contains(&case.key()) {
            continue;
        }
        for text in [case.canonical(name), case.raw.clone()] {
            let squashed = squash(&text);
            let squashed = squashed.strip_prefix("assert").unwrap_or(&squashed).to_string();
            if !out.contains(&squashed) {
                out.push(squashed);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leak {
    /// Request fingerprint of the offending prompt.
    pub prompt: String,
    pub hidden: String,
}

pub fn scan_leakage(prompts: &[PromptLog], fingerprints: &[String]) -> Vec<Leak> {
    let mut leaks = Vec::new();
    for prompt in prompts {
        let text = squash(&prompt.text);
        for f in fingerprints {
            if text.contains(f.as_str()) {
                leaks.push(Leak { prompt: prompt.fingerprint.clone(), hidden: f.clone() });
            }
        }
    }
    leaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::{parse_dataset, DatasetFormat};

    #[test]
    fn detects_hidden_assertions_in_prompts() {
        let line = serde_json::json!({
            "id": "p", "description": "d", "entry_point": "f(x)",
            "provided_examples": ["assert f(1) == 2"],
            "hidden_tests": ["assert f(1) == 2", "assert f(10) == 20"],
        });
        let ds = parse_dataset(&line.to_string(), DatasetFormat::LinesV1).unwrap();
        let fps = hidden_fingerprints(&ds.problems[0]);
        assert_eq!(fps, vec!["f(10)==20".to_string()]);
        let clean = PromptLog { fingerprint: "generator:p".into(), text: "example: assert f(1) == 2".into() };
        let dirty = PromptLog { fingerprint: "planner:p".into(), text: "check f( 10 ) ==20 please".into() };
        let leaks = scan_leakage(&[clean, dirty], &fps);
        assert_eq!(leaks, vec![Leak { prompt: "planner:p".into(), hidden: "f(10)==20".into() }]);
    }
}
