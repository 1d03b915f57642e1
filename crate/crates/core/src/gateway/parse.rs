//! Turning completions into functions and plans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pysrc::{self, ItemKind, SyntaxError};
use crate::policy::{EntryPoint, FunctionImpl, HelperSet, Origin, PlanResult, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("completion contains no fenced code block")]
    NoCodeBlock,
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("code block does not define `{0}`")]
    MissingTarget(String),
    #[error("`{0}` is left unimplemented")]
    TargetNotImplemented(String),
    #[error("stub `{0}` has no docstring")]
    StubWithoutDocstring(String),
}

/// Returns the body of the last complete fenced block (```` ``` ````).
pub fn last_code_block(text: &str) -> Option<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(after) = trimmed.strip_prefix("```") {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None if after.trim().chars().all(|c| c.is_alphanumeric() || c == '-' || c == '+') => {
                    current = Some(Vec::new());
                }
                None => {}
            }
            continue;
        }
        if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    blocks.pop()
}

/// A stub function found in planner output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stub {
    pub name: String,
    pub signature: EntryPoint,
    pub docstring: Option<String>,
}

/// Top-level functions whose body is only an unimplemented marker, in order
/// of appearance.
pub fn extract_stubs(source: &str) -> Result<Vec<Stub>, SyntaxError> {
    let items = pysrc::top_level_items(&pysrc::dedent(source))?;
    Ok(items
        .iter()
        .filter_map(|item| item.def())
        .filter(|def| def.is_stub)
        .map(|def| Stub {
            name: def.header.name.clone(),
            signature: EntryPoint {
                name: def.header.name.clone(),
                params: def.header.params.clone(),
                returns: def.header.returns.clone(),
            },
            docstring: def.docstring.clone().filter(|d| !d.trim().is_empty()),
        })
        .collect())
}

struct Split {
    target: Option<(String, Option<String>, bool)>,
    prelude: Vec<String>,
    stubs: Vec<Stub>,
}

/// Splits a block into the target definition, prelude code and stubs.
/// Definitions that shadow names already in `helpers` are dropped.
fn split_block(block: &str, target: &str, helpers: &HelperSet) -> Result<Split, ParseError> {
    let items = pysrc::top_level_items(&pysrc::dedent(block))?;
    let mut split = Split { target: None, prelude: Vec::new(), stubs: Vec::new() };
    for item in items {
        match &item.kind {
            ItemKind::Def(def) if def.header.name == target => {
                if split.target.is_none() {
                    split.target = Some((item.source.clone(), def.docstring.clone(), def.is_stub));
                }
            }
            ItemKind::Def(def) if helpers.contains(&def.header.name) => {}
            ItemKind::Def(def) if def.is_stub => split.stubs.push(Stub {
                name: def.header.name.clone(),
                signature: EntryPoint {
                    name: def.header.name.clone(),
                    params: def.header.params.clone(),
                    returns: def.header.returns.clone(),
                },
                docstring: def.docstring.clone().filter(|d| !d.trim().is_empty()),
            }),
            ItemKind::Def(_) | ItemKind::Import | ItemKind::Other => split.prelude.push(item.source.clone()),
        }
    }
    Ok(split)
}

/// Parses a generation completion into the target function.
pub fn parse_generation(
    completion: &str,
    problem: &ProblemSpec,
    helpers: &HelperSet,
) -> Result<FunctionImpl, ParseError> {
    let block = last_code_block(completion).ok_or(ParseError::NoCodeBlock)?;
    let name = problem.name();
    let split = split_block(&block, name, helpers)?;
    let (source, docstring, is_stub) = split.target.ok_or_else(|| ParseError::MissingTarget(name.to_string()))?;
    if is_stub {
        return Err(ParseError::TargetNotImplemented(name.to_string()));
    }
    let docstring = docstring.filter(|d| !d.is_empty()).unwrap_or_else(|| problem.description.clone());
    // stubs emitted by a generator stay in the prelude; they surface as
    // failing calls rather than silently disappearing
    let mut prelude = split.prelude;
    for stub in &split.stubs {
        let doc = stub.docstring.clone().unwrap_or_default();
        prelude.push(format!(
            "{}\n    \"\"\"{doc}\"\"\"\n    raise NotImplementedError()\n",
            stub.signature.def_header()
        ));
    }
    Ok(FunctionImpl::new(name, &source, &docstring, Origin::Trial).with_prelude(&prelude.join("\n")))
}

/// Parses a planning completion. Stubs without docstrings are reported as
/// [`ParseError::StubWithoutDocstring`] unless `drop_undocumented` is set,
/// in which case they are silently discarded.
pub fn parse_plan(
    completion: &str,
    problem: &ProblemSpec,
    helpers: &HelperSet,
    drop_undocumented: bool,
) -> Result<PlanResult, ParseError> {
    let block = last_code_block(completion).ok_or(ParseError::NoCodeBlock)?;
    let name = problem.name();
    let split = split_block(&block, name, helpers)?;
    let (source, docstring, is_stub) = split.target.ok_or_else(|| ParseError::MissingTarget(name.to_string()))?;
    if is_stub {
        return Err(ParseError::TargetNotImplemented(name.to_string()));
    }
    let mut subproblems = Vec::new();
    for stub in split.stubs {
        let Some(doc) = stub.docstring else {
            if drop_undocumented {
                continue;
            }
            return Err(ParseError::StubWithoutDocstring(stub.name));
        };
        if subproblems.iter().any(|p: &ProblemSpec| p.entry_point.name == stub.name) {
            continue;
        }
        subproblems.push(ProblemSpec {
            id: format!("{}::{}", problem.id, stub.name),
            description: doc,
            entry_point: stub.signature,
            provided_examples: Vec::new(),
            difficulty: None,
            depth: problem.depth + 1,
        });
    }
    let docstring = docstring.filter(|d| !d.is_empty()).unwrap_or_else(|| problem.description.clone());
    let rewrite =
        FunctionImpl::new(name, &source, &docstring, Origin::PlanRewrite).with_prelude(&split.prelude.join("\n"));
    Ok(PlanResult { rewrite, subproblems })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const PLAN_SAMPLE: &str = r#"def sum_common_factors(a: int, b: int) -> int:
    """Compute the sum of all common prime factors of $a$ and $b$"""
    factors_a = prime_factor(a)
    factors_b = prime_factor(b)
    common_factors = get_common(factors_a, factors_b)
    return sum(common_factors)

def prime_factor(x: int) -> list:
    """get a list of prime factors of number $x$"""
    raise NotImplementedError()

def get_common(a: list, b: list) -> list:
    """get common element in two list $a$ and $b$"""
    raise NotImplementedError()
"#;

    fn problem() -> ProblemSpec {
        ProblemSpec {
            id: "p".into(),
            description: "Compute the sum of all common prime factors of $a$ and $b$".into(),
            entry_point: "sum_common_factors(a: int, b: int) -> int".parse().unwrap(),
            provided_examples: vec![],
            difficulty: None,
            depth: 0,
        }
    }

    #[test]
    fn last_block_wins() {
        let text = "restated:\n```python\ndef a():\n    pass\n```\nanswer:\n```\ndef b():\n    return 1\n```\n";
        assert_eq!(last_code_block(text).unwrap(), "def b():\n    return 1");
        assert_eq!(last_code_block("no code here"), None);
        assert_eq!(last_code_block("```python\ndef a(): pass\n"), None);
    }

    #[test]
    fn extracts_planning_sample_stubs() {
        let stubs = extract_stubs(PLAN_SAMPLE).unwrap();
        let names: Vec<_> = stubs.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, vec!["prime_factor", "get_common"]);
        assert_eq!(stubs[0].signature.to_string(), "prime_factor(x: int) -> list");
        assert!(extract_stubs("def f(x):\n    return x\n").unwrap().is_empty());
        assert!(extract_stubs("def f(x:\n").is_err());
    }

    #[test]
    fn nested_definitions_are_not_stubs() {
        let src = "def outer(x):\n    \"\"\"o\"\"\"\n    def inner(y):\n        \"\"\"i\"\"\"\n        raise NotImplementedError()\n    return inner(x)\n";
        assert!(extract_stubs(src).unwrap().is_empty());
    }

    #[test]
    fn plan_yields_subproblems() {
        let completion = format!("Here is the plan:\n```python\n{PLAN_SAMPLE}```\n");
        let plan = parse_plan(&completion, &problem(), &HelperSet::new(), false).unwrap();
        assert_eq!(plan.subproblems.len(), 2);
        assert_eq!(plan.subproblems[0].id, "p::prime_factor");
        assert_eq!(plan.subproblems[0].depth, 1);
        assert_eq!(plan.subproblems[1].description, "get common element in two list $a$ and $b$");
        assert!(plan.rewrite.source.contains("get_common(factors_a, factors_b)"));
        assert!(plan.rewrite.prelude.is_empty());
    }

    #[test]
    fn plan_stub_without_docstring() {
        let completion = "```python\ndef sum_common_factors(a, b):\n    return h(a)\n\ndef h(a):\n    raise NotImplementedError()\n```";
        assert_eq!(
            parse_plan(completion, &problem(), &HelperSet::new(), false).unwrap_err(),
            ParseError::StubWithoutDocstring("h".into())
        );
        let plan = parse_plan(completion, &problem(), &HelperSet::new(), true).unwrap();
        assert!(plan.subproblems.is_empty());
    }

    #[test]
    fn plan_redefinition_of_helper_is_ignored() {
        let mut helpers = HelperSet::new();
        helpers.insert(
            FunctionImpl::new("get_common", "def get_common(a, b):\n    \"\"\"c\"\"\"\n    return [x for x in a if x in b]", "c", Origin::Helper),
            true,
        );
        let completion = "```python\ndef sum_common_factors(a, b):\n    \"\"\"s\"\"\"\n    return sum(get_common(a, b))\n\ndef get_common(a, b):\n    \"\"\"bad\"\"\"\n    return []\n```";
        let plan = parse_plan(completion, &problem(), &helpers, false).unwrap();
        assert!(plan.subproblems.is_empty());
        assert!(plan.rewrite.prelude.is_empty());
    }

    #[test]
    fn generation_keeps_imports_in_prelude() {
        let completion = "```python\nimport math\n\ndef sum_common_factors(a, b):\n    return math.gcd(a, b)\n```";
        let f = parse_generation(completion, &problem(), &HelperSet::new()).unwrap();
        assert_eq!(f.prelude, "import math\n");
        assert_eq!(f.docstring, problem().description);
        assert!(f.source.starts_with("def sum_common_factors"));
        let err = parse_generation("```python\ndef other():\n    return 1\n```", &problem(), &HelperSet::new());
        assert_eq!(err.unwrap_err(), ParseError::MissingTarget("sum_common_factors".into()));
    }
}
