//! Assertion-line parsing.
//!
//! Two forms are recognised:
//!
//! ```text
//! assert add(2, 3) == 5            # optional trailing `, "message"`
//! >>> add(2, 3)                    # doctest form, expected value on the next line
//! 5
//! ```
//!
//! The leading `assert` may be omitted in provided examples.

use serde::{Deserialize, Serialize};

use super::literal::{Cursor, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Provided,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub call_args: Vec<Literal>,
    pub expected: Literal,
    pub provenance: Provenance,
    /// The assertion text as it appeared in the source.
    pub raw: String,
}

impl TestCase {
    /// Canonical rendering of the argument list, without parentheses.
    pub fn args_text(&self) -> String {
        self.call_args.iter().map(Literal::render).collect::<Vec<_>>().join(", ")
    }

    /// Canonical `[a, b, ...]` list literal used on the sandbox wire.
    pub fn args_list(&self) -> String {
        Literal::List(self.call_args.clone()).render()
    }

    /// `assert name(args) == expected` in canonical form.
    pub fn canonical(&self, entry_point: &str) -> String {
        format!("assert {entry_point}({}) == {}", self.args_text(), self.expected.render())
    }

    /// Identity used for deduplication.
    pub fn key(&self) -> (String, String) {
        (self.args_list(), self.expected.render())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// The assertion calls a function other than the entry point.
    OtherName,
    /// An argument or the expected value is an expression, not a literal.
    NonLiteral,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    /// 1-based line of the skipped assertion.
    pub line: usize,
    pub raw: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedAssertions {
    pub cases: Vec<TestCase>,
    pub skipped: Vec<Skipped>,
}

/// Net bracket depth of `text`, ignoring brackets inside string literals.
fn bracket_balance(text: &str) -> i32 {
    let mut depth = 0;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for ch in text.chars() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == q {
                quote = None;
            }
            continue;
        }
        match ch {
            '\'' | '"' => quote = Some(ch),
            '#' => break,
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
    }
    depth
}

/// Longest run of continuation lines joined to an unbalanced assertion.
const MAX_CONTINUATION: usize = 40;

fn parse_call_line(text: &str, entry_point: &str, line: usize, provenance: Provenance) -> Result<TestCase, Skipped> {
    let skip = |reason| Skipped { line, raw: text.to_string(), reason };
    let body = text.trim();
    let body = body.strip_prefix("assert").filter(|r| r.starts_with(char::is_whitespace)).unwrap_or(body);
    let mut cursor = Cursor::new(body);
    let Some(name) = cursor.identifier() else { return Err(skip(SkipReason::Malformed)) };
    if cursor.peek() == Some('.') {
        return Err(skip(SkipReason::OtherName));
    }
    if !cursor.eat("(") {
        return Err(skip(if name == entry_point { SkipReason::Malformed } else { SkipReason::OtherName }));
    }
    if name != entry_point {
        return Err(skip(SkipReason::OtherName));
    }
    let args = call_args(&mut cursor).map_err(skip)?;
    if !cursor.eat("==") {
        return Err(skip(SkipReason::Malformed));
    }
    let expected = cursor.literal().map_err(|e| skip(if e.non_literal { SkipReason::NonLiteral } else { SkipReason::Malformed }))?;
    cursor.skip_ws();
    let tail = cursor.rest();
    if !(tail.is_empty() || tail.starts_with('#') || tail.starts_with(',')) {
        return Err(skip(trailing_reason(tail)));
    }
    Ok(TestCase { call_args: args, expected, provenance, raw: text.trim().to_string() })
}

fn trailing_reason(tail: &str) -> SkipReason {
    // `== 5 + 1` or `== x` are expressions; anything else is noise
    if tail.starts_with(|c: char| "+-*/%@<>!&|^.([".contains(c)) || tail.starts_with("and") || tail.starts_with("or") {
        SkipReason::NonLiteral
    } else {
        SkipReason::Malformed
    }
}

fn call_args(cursor: &mut Cursor<'_>) -> Result<Vec<Literal>, SkipReason> {
    let mut args = Vec::new();
    if cursor.eat(")") {
        return Ok(args);
    }
    loop {
        match cursor.literal() {
            Ok(lit) => args.push(lit),
            // `f(x=1)`, `f(g(1))` and other shapes the literal parser refuses
            Err(_) => return Err(SkipReason::NonLiteral),
        }
        if cursor.eat(")") {
            return Ok(args);
        }
        if !cursor.eat(",") {
            cursor.skip_ws();
            return Err(if cursor.at_end() { SkipReason::Malformed } else { SkipReason::NonLiteral });
        }
        if cursor.eat(")") {
            return Ok(args);
        }
    }
}

/// Parses every assertion addressed to `entry_point` in `raw`. Lines that are
/// not assertions (prose, code fences, blank lines) are ignored silently;
/// assertions that cannot be used are listed in `skipped`.
pub fn parse_assertions(raw: &str, entry_point: &str, provenance: Provenance) -> ParsedAssertions {
    let lines: Vec<&str> = raw.lines().collect();
    let mut out = ParsedAssertions::default();
    let mut i = 0;
    while i < lines.len() {
        let trimmed = lines[i].trim();
        if let Some(call) = trimmed.strip_prefix(">>>") {
            let expected = lines.get(i + 1).map(|l| l.trim()).unwrap_or("");
            let text = format!("{} == {}", call.trim(), expected);
            let raw_text = format!("{trimmed}\n{expected}");
            match parse_call_line(&text, entry_point, i + 1, provenance) {
                Ok(mut case) => {
                    case.raw = raw_text;
                    out.cases.push(case);
                }
                Err(mut skip) => {
                    skip.raw = raw_text;
                    out.skipped.push(skip);
                }
            }
            i += 2;
            continue;
        }
        let is_assert = trimmed.starts_with("assert ") || trimmed.starts_with("assert(");
        let bare_call = provenance == Provenance::Provided
            && trimmed.starts_with(entry_point)
            && trimmed[entry_point.len()..].trim_start().starts_with('(');
        if !(is_assert || bare_call) {
            i += 1;
            continue;
        }
        let start = i;
        let mut text = trimmed.to_string();
        let mut depth = bracket_balance(&text);
        while depth > 0 && i + 1 < lines.len() && i - start < MAX_CONTINUATION {
            i += 1;
            text.push(' ');
            text.push_str(lines[i].trim());
            depth = bracket_balance(&text);
        }
        match parse_call_line(&text, entry_point, start + 1, provenance) {
            Ok(case) => out.cases.push(case),
            Err(skip) => out.skipped.push(skip),
        }
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(raw: &str, ep: &str) -> ParsedAssertions {
        parse_assertions(raw, ep, Provenance::Generated)
    }

    #[test]
    fn simple_assertion() {
        let p = gen("assert add(2,3) == 5", "add");
        assert_eq!(p.cases.len(), 1);
        assert_eq!(p.cases[0].call_args, vec![Literal::Int(2), Literal::Int(3)]);
        assert_eq!(p.cases[0].expected, Literal::Int(5));
        assert_eq!(p.cases[0].canonical("add"), "assert add(2, 3) == 5");
    }

    #[test]
    fn skip_reasons() {
        let p = gen("assert other(1) == 1\nassert add(f(1)) == 2\nassert add(1, 2) = 3\nassert add(1) == x", "add");
        let reasons: Vec<_> = p.skipped.iter().map(|s| s.reason).collect();
        assert_eq!(reasons, vec![SkipReason::OtherName, SkipReason::NonLiteral, SkipReason::Malformed, SkipReason::NonLiteral]);
        assert!(p.cases.is_empty());
        assert_eq!(p.skipped[1].line, 2);
    }

    #[test]
    fn attribute_calls_are_other_names() {
        let p = gen("assert math.isclose(add(1, 2), 3)", "add");
        assert_eq!(p.skipped[0].reason, SkipReason::OtherName);
    }

    #[test]
    fn messages_comments_and_prose() {
        let raw = "Here are the tests:\n```python\nassert add(1, 2) == 3, \"basic\"\nassert add(0, 0) == 0  # zero\n```\n";
        let p = gen(raw, "add");
        assert_eq!(p.cases.len(), 2);
        assert!(p.skipped.is_empty());
    }

    #[test]
    fn multi_line_assertion() {
        let p = gen("assert merge([1, 2],\n             [3]) == [\n    1, 2, 3]\nassert merge([], []) == []", "merge");
        assert_eq!(p.cases.len(), 2);
        assert_eq!(p.cases[0].expected.render(), "[1, 2, 3]");
    }

    #[test]
    fn doctest_and_bare_forms_for_provided_examples() {
        let p = parse_assertions(">>> add(1, 2)\n3\nadd(2, 2) == 4", "add", Provenance::Provided);
        assert_eq!(p.cases.len(), 2);
        assert_eq!(p.cases[0].raw, ">>> add(1, 2)\n3");
        assert_eq!(p.cases[1].expected, Literal::Int(4));
        // bare calls are not accepted in model output
        assert!(gen("add(2, 2) == 4", "add").cases.is_empty());
    }

    #[test]
    fn zero_and_trailing_comma_args() {
        let p = gen("assert f() == None\nassert f(1,) == (1,)", "f");
        assert_eq!(p.cases.len(), 2);
        assert!(p.cases[0].call_args.is_empty());
        assert_eq!(p.cases[1].expected, Literal::Tuple(vec![Literal::Int(1)]));
    }

    #[test]
    fn keyword_args_are_non_literal() {
        let p = gen("assert f(x=1) == 1", "f");
        assert_eq!(p.skipped[0].reason, SkipReason::NonLiteral);
    }
}
