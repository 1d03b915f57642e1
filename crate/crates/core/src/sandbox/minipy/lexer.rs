//! Tokenizer with Python's indentation rules.

use super::SyntaxErr;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    /// f-string: alternating literal text and expression source.
    FStr(Vec<FPart>),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FPart {
    Text(String),
    /// Expression source plus optional format spec and conversion.
    Expr { source: String, spec: String, conversion: Option<char> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
}

const OPS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "==", "!=", "<=", ">=", "<<", ">>", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "<", ">", "=", "(", ")", "[", "]",
    "{", "}", ",", ":", ".", ";", "&", "|", "^", "~",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxErr> {
    Lexer { chars: src.chars().collect(), pos: 0, line: 1, tokens: Vec::new(), indents: vec![0], depth: 0 }.run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    tokens: Vec<Token>,
    indents: Vec<usize>,
    depth: usize,
}

impl Lexer {
    fn err(&self, message: impl Into<String>) -> SyntaxErr {
        SyntaxErr { line: self.line, message: message.into() }
    }

    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn push(&mut self, tok: Tok) {
        self.tokens.push(Token { tok, line: self.line });
    }

    fn run(mut self) -> Result<Vec<Token>, SyntaxErr> {
        let mut at_line_start = true;
        while self.pos < self.chars.len() {
            if at_line_start && self.depth == 0 {
                if self.line_start()? {
                    continue;
                }
                at_line_start = false;
            }
            let Some(c) = self.peek(0) else { break };
            match c {
                '\n' => {
                    self.pos += 1;
                    if self.depth == 0 {
                        self.push(Tok::Newline);
                        at_line_start = true;
                    }
                    self.line += 1;
                }
                ' ' | '\t' | '\r' | '\x0c' => self.pos += 1,
                '#' => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.pos += 1;
                    }
                }
                '\\' if self.peek(1) == Some('\n') => {
                    self.pos += 2;
                    self.line += 1;
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    self.number()?
                }
                c if c == '_' || c.is_alphabetic() => self.name_or_string()?,
                '"' | '\'' => {
                    let text = self.string_body(false)?;
                    self.push(Tok::Str(text));
                }
                _ => self.op()?,
            }
        }
        if self.tokens.last().is_some_and(|t| t.tok != Tok::Newline) {
            self.push(Tok::Newline);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent);
        }
        self.push(Tok::Eof);
        Ok(self.tokens)
    }

    /// Handles indentation at the start of a physical line. Returns true if
    /// the line was blank or a comment and has been consumed.
    fn line_start(&mut self) -> Result<bool, SyntaxErr> {
        let mut width = 0;
        let mut p = self.pos;
        while let Some(c) = self.chars.get(p) {
            match c {
                ' ' => width += 1,
                '\t' => width = (width / 8 + 1) * 8,
                '\x0c' | '\r' => {}
                _ => break,
            }
            p += 1;
        }
        match self.chars.get(p) {
            None => {
                self.pos = p;
                return Ok(true);
            }
            Some('\n') => {
                self.pos = p + 1;
                self.line += 1;
                return Ok(true);
            }
            Some('#') => {
                while self.chars.get(p).is_some_and(|&c| c != '\n') {
                    p += 1;
                }
                self.pos = p;
                return Ok(true);
            }
            _ => {}
        }
        self.pos = p;
        let current = *self.indents.last().expect("indent stack");
        if width > current {
            self.indents.push(width);
            self.push(Tok::Indent);
        } else {
            while width < *self.indents.last().expect("indent stack") {
                self.indents.pop();
                self.push(Tok::Dedent);
            }
            if width != *self.indents.last().expect("indent stack") {
                return Err(self.err("unindent does not match any outer indentation level"));
            }
        }
        Ok(false)
    }

    fn number(&mut self) -> Result<(), SyntaxErr> {
        let start = self.pos;
        if self.peek(0) == Some('0') && matches!(self.peek(1), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B')) {
            let radix = match self.peek(1) {
                Some('x' | 'X') => 16,
                Some('o' | 'O') => 8,
                _ => 2,
            };
            self.pos += 2;
            let digits_start = self.pos;
            while self.peek(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            let digits: String = self.chars[digits_start..self.pos].iter().filter(|&&c| c != '_').collect();
            let value = i64::from_str_radix(&digits, radix).map_err(|_| self.err("invalid integer literal"))?;
            self.push(Tok::Int(value));
            return Ok(());
        }
        let mut is_float = false;
        while let Some(c) = self.peek(0) {
            if c.is_ascii_digit() || c == '_' {
                self.pos += 1;
            } else if c == '.' && !is_float {
                is_float = true;
                self.pos += 1;
            } else if (c == 'e' || c == 'E')
                && (self.peek(1).is_some_and(|d| d.is_ascii_digit())
                    || (matches!(self.peek(1), Some('+' | '-')) && self.peek(2).is_some_and(|d| d.is_ascii_digit())))
            {
                is_float = true;
                self.pos += 2;
            } else {
                break;
            }
        }
        if matches!(self.peek(0), Some('j' | 'J')) {
            return Err(self.err("complex literals are not supported"));
        }
        let text: String = self.chars[start..self.pos].iter().filter(|&&c| c != '_').collect();
        if is_float {
            let value: f64 = text.parse().map_err(|_| self.err("invalid float literal"))?;
            self.push(Tok::Float(value));
        } else {
            match text.parse::<i64>() {
                Ok(v) => self.push(Tok::Int(v)),
                Err(_) => return Err(self.err("integer literal too large")),
            }
        }
        Ok(())
    }

    fn name_or_string(&mut self) -> Result<(), SyntaxErr> {
        let start = self.pos;
        while self.peek(0).is_some_and(|c| c == '_' || c.is_alphanumeric()) {
            self.pos += 1;
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        if matches!(self.peek(0), Some('"' | '\'')) {
            let lower = word.to_ascii_lowercase();
            match lower.as_str() {
                "r" | "u" | "b" | "br" | "rb" => {
                    let text = self.string_body(lower.contains('r'))?;
                    self.push(Tok::Str(text));
                    return Ok(());
                }
                "f" | "rf" | "fr" => {
                    let text = self.string_body(lower.contains('r'))?;
                    let parts = self.fstring_parts(&text)?;
                    self.push(Tok::FStr(parts));
                    return Ok(());
                }
                _ => {}
            }
        }
        self.push(Tok::Name(word));
        Ok(())
    }

    fn string_body(&mut self, raw: bool) -> Result<String, SyntaxErr> {
        let quote = self.peek(0).expect("quote");
        let triple = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        self.pos += if triple { 3 } else { 1 };
        let mut out = String::new();
        loop {
            let Some(c) = self.peek(0) else { return Err(self.err("unterminated string literal")) };
            if c == quote {
                if !triple {
                    self.pos += 1;
                    return Ok(out);
                }
                if self.peek(1) == Some(quote) && self.peek(2) == Some(quote) {
                    self.pos += 3;
                    return Ok(out);
                }
            }
            if c == '\n' {
                if !triple {
                    return Err(self.err("unterminated string literal"));
                }
                self.line += 1;
            }
            if c == '\\' {
                let Some(next) = self.peek(1) else { return Err(self.err("unterminated string literal")) };
                if raw {
                    out.push('\\');
                    out.push(next);
                    if next == '\n' {
                        self.line += 1;
                    }
                    self.pos += 2;
                    continue;
                }
                self.pos += 2;
                match next {
                    '\n' => self.line += 1,
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    '0' => out.push('\0'),
                    'a' => out.push('\x07'),
                    'b' => out.push('\x08'),
                    'f' => out.push('\x0c'),
                    'v' => out.push('\x0b'),
                    '\\' | '\'' | '"' => out.push(next),
                    'x' | 'u' | 'U' => {
                        let digits = match next {
                            'x' => 2,
                            'u' => 4,
                            _ => 8,
                        };
                        let hex: String = (0..digits).filter_map(|i| self.peek(i)).collect();
                        let value = u32::from_str_radix(&hex, 16)
                            .ok()
                            .filter(|_| hex.len() == digits)
                            .and_then(char::from_u32)
                            .ok_or_else(|| self.err("invalid escape sequence"))?;
                        out.push(value);
                        self.pos += digits;
                    }
                    other => {
                        out.push('\\');
                        out.push(other);
                    }
                }
                continue;
            }
            out.push(c);
            self.pos += 1;
        }
    }

    fn fstring_parts(&self, text: &str) -> Result<Vec<FPart>, SyntaxErr> {
        let chars: Vec<char> = text.chars().collect();
        let mut parts = Vec::new();
        let mut literal = String::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == '{' && chars.get(i + 1) == Some(&'{') {
                literal.push('{');
                i += 2;
                continue;
            }
            if c == '}' && chars.get(i + 1) == Some(&'}') {
                literal.push('}');
                i += 2;
                continue;
            }
            if c == '{' {
                if !literal.is_empty() {
                    parts.push(FPart::Text(std::mem::take(&mut literal)));
                }
                let mut depth = 0;
                let mut j = i + 1;
                let mut quote: Option<char> = None;
                let mut expr_end = None;
                let mut spec_start = None;
                while j < chars.len() {
                    let d = chars[j];
                    if let Some(q) = quote {
                        if d == q {
                            quote = None;
                        }
                    } else {
                        match d {
                            '\'' | '"' => quote = Some(d),
                            '(' | '[' | '{' => depth += 1,
                            ')' | ']' => depth -= 1,
                            '}' if depth > 0 => depth -= 1,
                            '}' => break,
                            ':' if depth == 0 && spec_start.is_none() => {
                                expr_end = Some(j);
                                spec_start = Some(j + 1);
                            }
                            _ => {}
                        }
                    }
                    j += 1;
                }
                if j >= chars.len() {
                    return Err(self.err("f-string: expecting '}'"));
                }
                let end = expr_end.unwrap_or(j);
                let mut source: String = chars[i + 1..end].iter().collect();
                let mut conversion = None;
                if let Some(pos) = source.rfind('!') {
                    let conv = source[pos + 1..].trim();
                    if matches!(conv, "r" | "s" | "a") {
                        conversion = conv.chars().next();
                        source.truncate(pos);
                    }
                }
                let source = source.trim_end_matches('=').to_string();
                let spec = spec_start.map(|s| chars[s..j].iter().collect()).unwrap_or_default();
                parts.push(FPart::Expr { source, spec, conversion });
                i = j + 1;
                continue;
            }
            if c == '}' {
                return Err(self.err("f-string: single '}' is not allowed"));
            }
            literal.push(c);
            i += 1;
        }
        if !literal.is_empty() {
            parts.push(FPart::Text(literal));
        }
        Ok(parts)
    }

    fn op(&mut self) -> Result<(), SyntaxErr> {
        for op in OPS {
            if op.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c)) {
                self.pos += op.chars().count();
                match *op {
                    "(" | "[" | "{" => self.depth += 1,
                    ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                    _ => {}
                }
                self.push(Tok::Op(op));
                return Ok(());
            }
        }
        Err(self.err(format!("invalid character {:?}", self.peek(0).unwrap_or(' '))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indentation() {
        let t = toks("def f(x):\n    if x:\n        return 1\n    return 2\n");
        let indents = t.iter().filter(|t| **t == Tok::Indent).count();
        let dedents = t.iter().filter(|t| **t == Tok::Dedent).count();
        assert_eq!((indents, dedents), (2, 2));
    }

    #[test]
    fn brackets_join_lines() {
        let t = toks("x = [1,\n     2]\n");
        assert_eq!(t.iter().filter(|t| **t == Tok::Newline).count(), 1);
    }

    #[test]
    fn numbers_and_strings() {
        assert_eq!(toks("0x1F 1_000 1.5 2e3 'a\\n' r'\\n'")[..6], [
            Tok::Int(31),
            Tok::Int(1000),
            Tok::Float(1.5),
            Tok::Float(2000.0),
            Tok::Str("a\n".into()),
            Tok::Str("\\n".into()),
        ]);
        assert_eq!(toks("\"\"\"a\nb\"\"\"")[0], Tok::Str("a\nb".into()));
    }

    #[test]
    fn fstrings() {
        match &toks("f'x={x!r:>4} {{y}}'")[0] {
            Tok::FStr(parts) => {
                assert_eq!(parts[0], FPart::Text("x=".into()));
                assert_eq!(parts[1], FPart::Expr { source: "x".into(), spec: ">4".into(), conversion: Some('r') });
                assert_eq!(parts[2], FPart::Text(" {y}".into()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_lines() {
        let e = tokenize("x = 1\ny = 'abc\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(tokenize("if x:\n    a\n  b\n").is_err());
    }
}
