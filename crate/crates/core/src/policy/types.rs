use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Difficulty categories used by competition-style benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Mid,
    Hard,
    Expert,
}

impl Difficulty {
    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Mid => "mid",
            Difficulty::Hard => "hard",
            Difficulty::Expert => "expert",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntryPointError {
    #[error("entry point {0:?} has no parameter list")]
    MissingParams(String),
    #[error("{0:?} is not a valid identifier")]
    InvalidName(String),
}

/// Target function name plus its parameter list and optional return
/// annotation, e.g. `sum_common_factors(a: int, b: int) -> int`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EntryPoint {
    pub name: String,
    pub params: String,
    pub returns: Option<String>,
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_alphanumeric()) && !crate::gateway::pysrc::is_keyword(name)
}

impl EntryPoint {
    pub fn new(name: &str, params: &str, returns: Option<&str>) -> Result<Self, EntryPointError> {
        if !is_identifier(name) {
            return Err(EntryPointError::InvalidName(name.to_string()));
        }
        Ok(Self {
            name: name.to_string(),
            params: params.trim().to_string(),
            returns: returns.map(|r| r.trim().to_string()).filter(|r| !r.is_empty()),
        })
    }

    /// `def name(params) -> ret:` header line.
    pub fn def_header(&self) -> String {
        match &self.returns {
            Some(ret) => format!("def {}({}) -> {}:", self.name, self.params, ret),
            None => format!("def {}({}):", self.name, self.params),
        }
    }
}

impl fmt::Display for EntryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.params)?;
        if let Some(ret) = &self.returns {
            write!(f, " -> {ret}")?;
        }
        Ok(())
    }
}

impl FromStr for EntryPoint {
    type Err = EntryPointError;

    /// Accepts `name(params)`, `name(params) -> ret`, and the same forms
    /// prefixed by `def` and/or suffixed by `:`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut text = s.trim();
        if let Some(rest) = text.strip_prefix("def ") {
            text = rest.trim_start();
        }
        text = text.strip_suffix(':').unwrap_or(text).trim_end();
        let open = text.find('(').ok_or_else(|| EntryPointError::MissingParams(s.to_string()))?;
        let name = text[..open].trim();
        let mut depth = 0usize;
        let mut close = None;
        for (i, ch) in text[open..].char_indices() {
            match ch {
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        close = Some(open + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let close = close.ok_or_else(|| EntryPointError::MissingParams(s.to_string()))?;
        let params = &text[open + 1..close];
        let tail = text[close + 1..].trim();
        let returns = tail.strip_prefix("->").map(str::trim);
        EntryPoint::new(name, params, returns)
    }
}

impl Serialize for EntryPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntryPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A specification to solve: the root benchmark problem or a planner-emitted
/// subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: String,
    pub description: String,
    pub entry_point: EntryPoint,
    #[serde(default)]
    pub provided_examples: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    #[serde(default)]
    pub depth: u32,
}

impl ProblemSpec {
    /// Current-code stub of the target: header, docstring, unimplemented body.
    pub fn stub_source(&self) -> String {
        format!(
            "{}\n    \"\"\"{}\"\"\"\n    raise NotImplementedError()\n",
            self.entry_point.def_header(),
            self.description
        )
    }

    pub fn name(&self) -> &str {
        &self.entry_point.name
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Trial,
    PlanRewrite,
    Helper,
}

/// One candidate function definition.
///
/// `source` holds exactly one `def`. Imports and any auxiliary top-level code
/// the model emitted alongside it are kept in `prelude`, which is rendered
/// immediately before `source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionImpl {
    pub name: String,
    pub source: String,
    pub docstring: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prelude: String,
}

pub(crate) fn normalize_block(text: &str) -> String {
    let trimmed = text.trim_matches('\n').trim_end();
    if trimmed.is_empty() {
        String::new()
    } else {
        format!("{trimmed}\n")
    }
}

impl FunctionImpl {
    pub fn new(name: &str, source: &str, docstring: &str, origin: Origin) -> Self {
        Self {
            name: name.to_string(),
            source: normalize_block(source),
            docstring: docstring.to_string(),
            origin,
            prelude: String::new(),
        }
    }

    pub fn with_prelude(mut self, prelude: &str) -> Self {
        self.prelude = normalize_block(prelude);
        self
    }

    /// Prelude followed by the definition.
    pub fn full_source(&self) -> String {
        if self.prelude.is_empty() {
            self.source.clone()
        } else {
            format!("{}\n{}", self.prelude, self.source)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelperEntry {
    pub function: FunctionImpl,
    pub verified: bool,
}

/// Insertion-ordered set of helper functions keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HelperSet {
    entries: Vec<HelperEntry>,
}

impl HelperSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&HelperEntry> {
        self.entries.iter().find(|e| e.function.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn is_verified(&self, name: &str) -> bool {
        self.get(name).is_some_and(|e| e.verified)
    }

    /// Inserts `function`. A verified entry is never replaced; an unverified
    /// entry is replaced in place (keeping its position). Returns whether the
    /// set changed.
    pub fn insert(&mut self, function: FunctionImpl, verified: bool) -> bool {
        match self.entries.iter_mut().find(|e| e.function.name == function.name) {
            Some(existing) if existing.verified => false,
            Some(existing) => {
                *existing = HelperEntry { function, verified };
                true
            }
            None => {
                self.entries.push(HelperEntry { function, verified });
                true
            }
        }
    }

    /// Adds every entry of `other` not already present as verified.
    pub fn merge(&mut self, other: &HelperSet) {
        for entry in &other.entries {
            self.insert(entry.function.clone(), entry.verified);
        }
    }

    /// Keeps only verified entries.
    pub fn verified_only(&self) -> HelperSet {
        HelperSet { entries: self.entries.iter().filter(|e| e.verified).cloned().collect() }
    }

    /// A copy without the entry named `name`.
    pub fn without(&self, name: &str) -> HelperSet {
        HelperSet { entries: self.entries.iter().filter(|e| e.function.name != name).cloned().collect() }
    }

    pub fn iter(&self) -> impl Iterator<Item = &HelperEntry> {
        self.entries.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.function.name.as_str())
    }

    /// Helper definitions concatenated in insertion order.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|e| e.function.full_source())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A composed program: helpers in insertion order followed by the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub top_level: FunctionImpl,
    pub helpers: HelperSet,
    pub rendered: String,
    /// Called names that resolve to no definition, builtin or import.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unresolved: Vec<String>,
}

impl Program {
    pub fn entry_point(&self) -> &str {
        &self.top_level.name
    }

    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(&Sha256::digest(self.rendered.as_bytes())[..8])
    }
}

/// A decomposition plan: rewritten top level plus one subproblem per stub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub rewrite: FunctionImpl,
    pub subproblems: Vec<ProblemSpec>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_point_parsing() {
        let ep: EntryPoint = "sum_common_factors(a: int, b: int) -> int".parse().unwrap();
        assert_eq!(ep.name, "sum_common_factors");
        assert_eq!(ep.params, "a: int, b: int");
        assert_eq!(ep.returns.as_deref(), Some("int"));
        assert_eq!(ep.def_header(), "def sum_common_factors(a: int, b: int) -> int:");
        let ep: EntryPoint = "def f(x: Dict[str, int] = {}):".parse().unwrap();
        assert_eq!(ep.params, "x: Dict[str, int] = {}");
        assert_eq!(ep.returns, None);
        assert!("1bad(x)".parse::<EntryPoint>().is_err());
        assert!("class(x)".parse::<EntryPoint>().is_err());
        assert!("noparens".parse::<EntryPoint>().is_err());
    }

    #[test]
    fn helper_set_keeps_verified_entries() {
        let mut set = HelperSet::new();
        let a = FunctionImpl::new("a", "def a():\n    return 1", "one", Origin::Helper);
        let a2 = FunctionImpl::new("a", "def a():\n    return 2", "two", Origin::Helper);
        let b = FunctionImpl::new("b", "def b():\n    return 3", "three", Origin::Helper);
        assert!(set.insert(b.clone(), false));
        assert!(set.insert(a.clone(), true));
        assert!(!set.insert(a2.clone(), true));
        assert_eq!(set.get("a").unwrap().function.source, a.source);
        let b2 = FunctionImpl::new("b", "def b():\n    return 4", "four", Origin::Helper);
        assert!(set.insert(b2.clone(), true));
        assert_eq!(set.names().collect::<Vec<_>>(), vec!["b", "a"]);
        assert!(set.is_verified("b"));
    }
}
