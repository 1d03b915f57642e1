//! Line-level structure of Python source: logical lines, top-level items,
//! function headers, docstrings and stub bodies.
//!
//! This is deliberately shallow. It understands strings, comments, bracket
//! nesting and indentation well enough to split model output into top-level
//! definitions; it does not parse expressions.

use std::collections::BTreeSet;

use thiserror::Error;

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

const BUILTINS: &[&str] = &[
    "abs", "all", "any", "bin", "bool", "chr", "dict", "divmod", "enumerate", "filter", "float",
    "format", "frozenset", "hash", "hex", "int", "isinstance", "iter", "len", "list", "map", "max",
    "min", "next", "oct", "ord", "pow", "print", "range", "repr", "reversed", "round", "set",
    "sorted", "str", "sum", "tuple", "type", "zip", "ValueError", "TypeError", "KeyError",
    "IndexError", "Exception", "NotImplementedError", "ZeroDivisionError", "RuntimeError",
    "AssertionError", "super", "object", "callable", "getattr", "hasattr", "setattr", "id",
    "slice", "bytes", "complex", "input", "open", "vars", "dir", "globals", "locals",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

pub fn is_builtin(word: &str) -> bool {
    BUILTINS.contains(&word)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}: {message}")]
pub struct SyntaxError {
    /// 1-based physical line.
    pub line: usize,
    pub message: String,
}

fn syntax(line: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError { line, message: message.into() }
}

/// One logical line (physical lines joined across brackets, continuations
/// and triple-quoted strings), with comments removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalLine {
    /// 0-based index of the first physical line.
    pub first: usize,
    /// 0-based index of the last physical line (inclusive).
    pub last: usize,
    pub indent: usize,
    pub text: String,
}

/// Splits source into logical lines, skipping blank and comment-only lines.
pub fn logical_lines(src: &str) -> Result<Vec<LogicalLine>, SyntaxError> {
    let physical: Vec<&str> = src.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < physical.len() {
        let line = physical[i];
        let stripped = line.trim_start();
        if stripped.is_empty() || stripped.starts_with('#') {
            i += 1;
            continue;
        }
        if line.starts_with('\t') && line.trim_start_matches('\t').starts_with(' ')
            || line[..line.len() - stripped.len()].contains('\t')
                && line[..line.len() - stripped.len()].contains(' ')
        {
            return Err(syntax(i + 1, "inconsistent use of tabs and spaces in indentation"));
        }
        let indent = line[..line.len() - stripped.len()]
            .chars()
            .map(|c| if c == '\t' { 8 } else { 1 })
            .sum();
        let first = i;
        let mut text = String::new();
        let mut depth: Vec<(char, usize)> = Vec::new();
        let mut in_string: Option<(char, bool)> = None;
        let mut current = stripped;
        loop {
            let mut chars = current.char_indices().peekable();
            let mut continued = false;
            while let Some((pos, ch)) = chars.next() {
                if let Some((quote, triple)) = in_string {
                    text.push(ch);
                    if ch == '\\' {
                        if let Some((_, next)) = chars.next() {
                            text.push(next);
                        } else if !triple {
                            continued = true;
                        }
                        continue;
                    }
                    if ch == quote {
                        if triple {
                            let rest = &current[pos..];
                            if rest.starts_with(&quote.to_string().repeat(3)) {
                                chars.next();
                                chars.next();
                                text.push(quote);
                                text.push(quote);
                                in_string = None;
                            }
                        } else {
                            in_string = None;
                        }
                    }
                    continue;
                }
                match ch {
                    '#' => break,
                    '\'' | '"' => {
                        let rest = &current[pos..];
                        let triple = rest.starts_with(&ch.to_string().repeat(3));
                        text.push(ch);
                        if triple {
                            chars.next();
                            chars.next();
                            text.push(ch);
                            text.push(ch);
                        }
                        in_string = Some((ch, triple));
                    }
                    '(' | '[' | '{' => {
                        depth.push((ch, i + 1));
                        text.push(ch);
                    }
                    ')' | ']' | '}' => {
                        let expected = match ch {
                            ')' => '(',
                            ']' => '[',
                            _ => '{',
                        };
                        if depth.pop().map(|d| d.0) != Some(expected) {
                            return Err(syntax(i + 1, format!("unmatched {ch:?}")));
                        }
                        text.push(ch);
                    }
                    '\\' if chars.peek().is_none() => continued = true,
                    _ => text.push(ch),
                }
            }
            match in_string {
                Some((_, false)) if !continued => {
                    return Err(syntax(i + 1, "unterminated string literal"));
                }
                _ => {}
            }
            let open = !depth.is_empty() || in_string.is_some() || continued;
            if !open {
                break;
            }
            i += 1;
            if i >= physical.len() {
                return Err(match (in_string, depth.first()) {
                    (None, Some(&(_, opened))) => syntax(opened, "unexpected end of input inside brackets"),
                    _ => syntax(i, "unterminated string literal"),
                });
            }
            if in_string.is_some() {
                text.push('\n');
                current = physical[i];
            } else {
                text.push(' ');
                current = physical[i].trim_start();
            }
        }
        out.push(LogicalLine { first, last: i, indent, text: text.trim_end().to_string() });
        i += 1;
    }
    Ok(out)
}

/// Parsed header of a `def` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefHeader {
    pub name: String,
    pub params: String,
    pub returns: Option<String>,
    /// Code after the colon on the header line (one-line bodies).
    pub inline_body: Option<String>,
}

/// Parses `def name(params) -> ret: [body]`.
pub fn parse_def_header(text: &str) -> Option<DefHeader> {
    let rest = text.strip_prefix("async ").unwrap_or(text).strip_prefix("def ")?.trim_start();
    let open = rest.find('(')?;
    let name = rest[..open].trim();
    if !crate::policy::is_identifier(name) {
        return None;
    }
    let mut depth = 0usize;
    let mut close = None;
    let mut quote: Option<char> = None;
    for (i, ch) in rest[open..].char_indices() {
        if let Some(q) = quote {
            if ch == q {
                quote = None;
            }
            continue;
        }
        match ch {
            '\'' | '"' => quote = Some(ch),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(open + i);
                    break;
                }
            }
            _ => {}
        }
    }
    let close = close?;
    let params = rest[open + 1..close].trim().to_string();
    let tail = rest[close + 1..].trim_start();
    let (returns, after) = if let Some(ann) = tail.strip_prefix("->") {
        let colon = top_level_colon(ann)?;
        (Some(ann[..colon].trim().to_string()), &ann[colon + 1..])
    } else {
        (None, tail.strip_prefix(':')?)
    };
    let inline = after.trim();
    Some(DefHeader {
        name: name.to_string(),
        params,
        returns,
        inline_body: (!inline.is_empty()).then(|| inline.to_string()),
    })
}

fn top_level_colon(text: &str) -> Option<usize> {
    let mut depth = 0i32;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ':' if depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItemKind {
    Def(DefInfo),
    Import,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefInfo {
    pub header: DefHeader,
    pub docstring: Option<String>,
    /// Body consists only of an unimplemented marker (optionally preceded
    /// by a docstring).
    pub is_stub: bool,
}

/// A top-level statement together with its physical source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub kind: ItemKind,
    pub source: String,
    pub first_line: usize,
}

impl Item {
    pub fn def(&self) -> Option<&DefInfo> {
        match &self.kind {
            ItemKind::Def(info) => Some(info),
            _ => None,
        }
    }
}

/// Removes the common leading indentation of all non-blank lines.
pub fn dedent(src: &str) -> String {
    let common = src
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    src.lines()
        .map(|l| if l.len() >= common { &l[common..] } else { l.trim_start() })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Splits a module into top-level items. Decorators attach to the following
/// definition.
pub fn top_level_items(src: &str) -> Result<Vec<Item>, SyntaxError> {
    let physical: Vec<&str> = src.lines().collect();
    let lines = logical_lines(src)?;
    let mut items = Vec::new();
    let mut idx = 0;
    while idx < lines.len() {
        let line = &lines[idx];
        if line.indent != 0 {
            return Err(syntax(line.first + 1, "unexpected indent"));
        }
        let start = idx;
        let mut header_idx = idx;
        while lines[header_idx].text.starts_with('@') {
            header_idx += 1;
            if header_idx >= lines.len() || lines[header_idx].indent != 0 {
                return Err(syntax(lines[idx].first + 1, "decorator without definition"));
            }
        }
        let header_line = &lines[header_idx];
        let mut end = header_idx + 1;
        while end < lines.len() && lines[end].indent > 0 {
            end += 1;
        }
        let text = &header_line.text;
        let kind = if text.starts_with("def ") || text.starts_with("async def ") {
            let header = parse_def_header(text)
                .ok_or_else(|| syntax(header_line.first + 1, "malformed function definition"))?;
            let body = &lines[header_idx + 1..end];
            if header.inline_body.is_none() && body.is_empty() {
                return Err(syntax(header_line.last + 1, "expected an indented block"));
            }
            if let Some(first) = body.first() {
                if let Some(bad) = body.iter().find(|l| l.indent < first.indent) {
                    if !body.iter().any(|l| l.indent == bad.indent && l.first < bad.first) {
                        return Err(syntax(bad.first + 1, "unindent does not match any outer level"));
                    }
                }
            }
            ItemKind::Def(analyse_body(header, body))
        } else if text.starts_with("import ") || text.starts_with("from ") {
            ItemKind::Import
        } else if text.ends_with(':') && end == header_idx + 1 {
            return Err(syntax(header_line.last + 1, "expected an indented block"));
        } else {
            ItemKind::Other
        };
        let first = lines[start].first;
        let last = lines[end - 1].last;
        let mut source = physical[first..=last].join("\n");
        source.push('\n');
        items.push(Item { kind, source, first_line: first + 1 });
        idx = end;
    }
    Ok(items)
}

fn analyse_body(header: DefHeader, body: &[LogicalLine]) -> DefInfo {
    let mut statements: Vec<&str> = Vec::new();
    if let Some(inline) = &header.inline_body {
        statements.push(inline.as_str());
    }
    let body_indent = body.first().map(|l| l.indent);
    statements.extend(body.iter().filter(|l| Some(l.indent) == body_indent).map(|l| l.text.as_str()));
    let nested = body.iter().any(|l| Some(l.indent) != body_indent);
    let docstring = statements.first().and_then(|s| string_literal_value(s));
    let rest: Vec<&str> = statements.iter().skip(usize::from(docstring.is_some())).copied().collect();
    let is_stub = !nested && rest.iter().all(|s| is_unimplemented_marker(s));
    DefInfo { header, docstring, is_stub }
}

fn is_unimplemented_marker(stmt: &str) -> bool {
    let s = stmt.trim().trim_end_matches(';').trim();
    if s == "pass" || s == "..." {
        return true;
    }
    let Some(rest) = s.strip_prefix("raise") else { return false };
    let rest = rest.trim_start();
    let Some(args) = rest.strip_prefix("NotImplementedError") else { return false };
    let args = args.trim();
    args.is_empty() || (args.starts_with('(') && args.ends_with(')'))
}

/// If `stmt` is a single string literal expression, returns its (dedented,
/// trimmed) content.
pub fn string_literal_value(stmt: &str) -> Option<String> {
    let mut s = stmt.trim();
    let lowered = s.to_ascii_lowercase();
    if lowered.starts_with('r') || lowered.starts_with('u') {
        s = &s[1..];
    }
    for quote in ["\"\"\"", "'''"] {
        if let Some(inner) = s.strip_prefix(quote).and_then(|r| r.strip_suffix(quote)) {
            if inner.contains(quote) {
                return None;
            }
            return Some(clean_docstring(inner));
        }
    }
    for quote in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(quote) && s.ends_with(quote) {
            let inner = &s[1..s.len() - 1];
            if inner.contains(quote) && !inner.contains('\\') {
                return None;
            }
            return Some(inner.replace("\\n", "\n").trim().to_string());
        }
    }
    None
}

fn clean_docstring(inner: &str) -> String {
    let mut lines: Vec<&str> = inner.lines().collect();
    if lines.is_empty() {
        return String::new();
    }
    let first = lines.remove(0).trim().to_string();
    let rest = dedent(&lines.join("\n"));
    let joined = if rest.trim().is_empty() { first } else { format!("{first}\n{rest}") };
    joined.trim().to_string()
}

/// Names that a module defines or imports at any nesting level: function
/// names, parameters, assignment and loop targets, imports.
pub fn defined_names(src: &str) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let Ok(lines) = logical_lines(src) else { return names };
    for line in &lines {
        let text = line.text.as_str();
        if let Some(header) = parse_def_header(text) {
            names.insert(header.name.clone());
            for param in split_top_level(&header.params, ',') {
                let name: String = param
                    .trim()
                    .trim_start_matches('*')
                    .chars()
                    .take_while(|c| c.is_alphanumeric() || *c == '_')
                    .collect();
                if !name.is_empty() {
                    names.insert(name);
                }
            }
        } else if let Some(rest) = text.strip_prefix("import ") {
            for part in rest.split(',') {
                let part = part.trim();
                let alias = part.rsplit(" as ").next().unwrap_or(part);
                names.insert(alias.split('.').next().unwrap_or(alias).trim().to_string());
            }
        } else if let Some(rest) = text.strip_prefix("from ") {
            if let Some((_, imported)) = rest.split_once(" import ") {
                for part in imported.trim_matches(|c| c == '(' || c == ')').split(',') {
                    let part = part.trim();
                    names.insert(part.rsplit(" as ").next().unwrap_or(part).trim().to_string());
                }
            }
        } else if let Some(rest) = text.strip_prefix("for ") {
            if let Some((targets, _)) = rest.split_once(" in ") {
                collect_targets(targets, &mut names);
            }
        } else if let Some(pos) = assignment_eq(text) {
            collect_targets(&text[..pos], &mut names);
        }
        for (kw, sep) in [("lambda", ':'), (" as ", ':')] {
            if let Some(pos) = text.find(kw) {
                let after = &text[pos + kw.len()..];
                if let Some(end) = after.find(sep) {
                    collect_targets(&after[..end], &mut names);
                }
            }
        }
        // comprehension variables
        let mut search = text;
        while let Some(pos) = search.find(" for ") {
            let after = &search[pos + 5..];
            if let Some((targets, _)) = after.split_once(" in ") {
                collect_targets(targets, &mut names);
            }
            search = after;
        }
    }
    names
}

fn collect_targets(text: &str, names: &mut BTreeSet<String>) {
    for part in text.split([',', '(', ')', '[', ']']) {
        let ident: String = part.trim().chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
        if !ident.is_empty() && part.trim() == ident && !is_keyword(&ident) {
            names.insert(ident);
        }
    }
}

fn assignment_eq(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0i32;
    let mut quote: Option<u8> = None;
    for (i, &b) in bytes.iter().enumerate() {
        if let Some(q) = quote {
            if b == q {
                quote = None;
            }
            continue;
        }
        match b {
            b'\'' | b'"' => quote = Some(b),
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            b'=' if depth == 0 => {
                let prev = if i > 0 { bytes[i - 1] } else { b' ' };
                let next = bytes.get(i + 1).copied().unwrap_or(b' ');
                if next != b'=' && !matches!(prev, b'=' | b'!' | b'<' | b'>') {
                    let mut end = i;
                    while end > 0 && matches!(bytes[end - 1], b'+' | b'-' | b'*' | b'/' | b'%' | b'&' | b'|' | b'^' | b':') {
                        end -= 1;
                    }
                    return Some(end);
                }
            }
            _ => {}
        }
    }
    None
}

/// Splits on `sep` outside brackets and strings.
pub fn split_top_level(text: &str, sep: char) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut current = String::new();
    for ch in text.chars() {
        if let Some(q) = quote {
            current.push(ch);
            if ch == q {
                quote = None;
            }
            continue;
        }
        match ch {
            '\'' | '"' => {
                quote = Some(ch);
                current.push(ch);
            }
            '(' | '[' | '{' => {
                depth += 1;
                current.push(ch);
            }
            ')' | ']' | '}' => {
                depth -= 1;
                current.push(ch);
            }
            c if c == sep && depth == 0 => parts.push(std::mem::take(&mut current)),
            c => current.push(c),
        }
    }
    if !current.trim().is_empty() {
        parts.push(current);
    }
    parts
}

/// Names used in call position (`name(`) that are not attribute calls.
pub fn called_names(src: &str) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let Ok(lines) = logical_lines(src) else { return names };
    for line in lines {
        let text = strip_strings(&line.text);
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i] == '_' || chars[i].is_alphabetic() {
                let start = i;
                while i < chars.len() && (chars[i] == '_' || chars[i].is_alphanumeric()) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let mut j = i;
                while j < chars.len() && chars[j] == ' ' {
                    j += 1;
                }
                let attribute = start > 0 && chars[start - 1] == '.';
                let digit_prefixed = start > 0 && chars[start - 1].is_ascii_digit();
                if j < chars.len() && chars[j] == '(' && !attribute && !digit_prefixed && !is_keyword(&word) {
                    names.insert(word);
                }
            } else {
                i += 1;
            }
        }
    }
    names
}

fn strip_strings(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
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
                out.push(' ');
            }
            continue;
        }
        if ch == '\'' || ch == '"' {
            quote = Some(ch);
            out.push(' ');
        } else {
            out.push(ch);
        }
    }
    out
}

/// Called names in `src` that have no definition in `src`, are not
/// builtins, and are not defined by `context`.
pub fn unresolved_calls(src: &str, context: &str) -> Vec<String> {
    let mut defined = defined_names(src);
    defined.extend(defined_names(context));
    called_names(src)
        .into_iter()
        .filter(|n| !defined.contains(n) && !is_builtin(n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = r#"def sum_common_factors(a: int, b: int) -> int:
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

    #[test]
    fn splits_top_level_definitions() {
        let items = top_level_items(PLAN).unwrap();
        assert_eq!(items.len(), 3);
        let defs: Vec<_> = items.iter().filter_map(Item::def).collect();
        assert_eq!(defs[0].header.name, "sum_common_factors");
        assert!(!defs[0].is_stub);
        assert!(defs[1].is_stub);
        assert!(defs[2].is_stub);
        assert_eq!(defs[1].docstring.as_deref(), Some("get a list of prime factors of number $x$"));
        assert_eq!(defs[2].header.params, "a: list, b: list");
        assert_eq!(defs[2].header.returns.as_deref(), Some("list"));
        assert!(items[1].source.starts_with("def prime_factor"));
    }

    #[test]
    fn logical_lines_join_brackets_and_triple_strings() {
        let src = "x = [1,\n     2]\ndef f():\n    \"\"\"multi\n    line\"\"\"\n    return x  # tail\n";
        let lines = logical_lines(src).unwrap();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].text, "x = [1, 2]");
        assert_eq!(lines[2].text, "\"\"\"multi\n    line\"\"\"");
        assert_eq!(lines[3].text, "return x");
        assert_eq!(string_literal_value(&lines[2].text).as_deref(), Some("multi\nline"));
    }

    #[test]
    fn reports_syntax_errors_with_location() {
        let err = top_level_items("def f(:\n    return 1\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = top_level_items("def f():\n    return (1\n").unwrap_err();
        assert!(err.message.contains("brackets"));
        let err = top_level_items("def f():\nreturn 1\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = top_level_items("  x = 1\n").unwrap_err();
        assert_eq!(err.message, "unexpected indent");
        assert!(top_level_items("s = 'abc\n").is_err());
    }

    #[test]
    fn stub_markers() {
        for body in ["raise NotImplementedError()", "raise NotImplementedError", "pass", "...", "raise NotImplementedError(\"todo\")"] {
            let src = format!("def f(x):\n    \"\"\"doc\"\"\"\n    {body}\n");
            assert!(top_level_items(&src).unwrap()[0].def().unwrap().is_stub, "{body}");
        }
        let src = "def f(x):\n    \"\"\"doc\"\"\"\n    return x\n";
        assert!(!top_level_items(src).unwrap()[0].def().unwrap().is_stub);
        let src = "def f(x): raise NotImplementedError()\n";
        assert!(top_level_items(src).unwrap()[0].def().unwrap().is_stub);
    }

    #[test]
    fn unresolved_names() {
        let src = "import math\ndef f(a, g):\n    y = helper(a) + math.sqrt(a)\n    h = lambda z: z\n    return g(y) + len([1]) + h(2) + [k for k in range(3)][0]\n";
        assert_eq!(unresolved_calls(src, ""), vec!["helper".to_string()]);
        assert!(unresolved_calls(src, "def helper(x):\n    return x\n").is_empty());
    }
}
