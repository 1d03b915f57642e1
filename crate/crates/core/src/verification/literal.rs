//! The closed literal grammar shared by test cases and the sandbox wire format.
//!
//! Literals are the Python-style values a test case may mention: numbers,
//! booleans, text strings, `None`, lists, tuples and maps. Rendering follows
//! Python's `repr` so that canonical text produced here matches what an
//! in-sandbox runner prints, with one exception: map keys are sorted by their
//! canonical rendering.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Relative tolerance used when comparing floats.
pub const FLOAT_REL_TOL: f64 = 1e-6;
/// Absolute tolerance used when comparing floats.
pub const FLOAT_ABS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Literal>),
    Tuple(Vec<Literal>),
    Dict(Vec<(Literal, Literal)>),
}

/// Serialized as canonical text.
impl Serialize for Literal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for Literal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Literal::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("literal syntax error at byte {offset}: {message}")]
pub struct LiteralError {
    pub offset: usize,
    pub message: String,
    /// Set when the input was syntactically an expression but not a literal
    /// (a name, a call, an operator other than unary minus).
    pub non_literal: bool,
}

impl Literal {
    /// Parses exactly one literal, allowing surrounding whitespace.
    pub fn parse(text: &str) -> Result<Literal, LiteralError> {
        let mut cursor = Cursor::new(text);
        let value = cursor.literal()?;
        cursor.skip_ws();
        if !cursor.at_end() {
            return Err(cursor.error("trailing characters after literal"));
        }
        Ok(value)
    }

    /// Canonical (Python `repr`-compatible) rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out);
        out
    }

    fn render_into(&self, out: &mut String) {
        match self {
            Literal::None => out.push_str("None"),
            Literal::Bool(true) => out.push_str("True"),
            Literal::Bool(false) => out.push_str("False"),
            Literal::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Literal::Float(v) => out.push_str(&render_float(*v)),
            Literal::Str(s) => out.push_str(&render_str(s)),
            Literal::List(items) => {
                out.push('[');
                render_seq(items, out);
                out.push(']');
            }
            Literal::Tuple(items) => {
                out.push('(');
                render_seq(items, out);
                if items.len() == 1 {
                    out.push(',');
                }
                out.push(')');
            }
            Literal::Dict(entries) => {
                let mut rendered: Vec<(String, String)> = entries
                    .iter()
                    .map(|(k, v)| (k.render(), v.render()))
                    .collect();
                rendered.sort_by(|a, b| a.0.cmp(&b.0));
                out.push('{');
                for (i, (k, v)) in rendered.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(k);
                    out.push_str(": ");
                    out.push_str(v);
                }
                out.push('}');
            }
        }
    }

    fn as_number(&self) -> Option<Number> {
        match self {
            Literal::Bool(b) => Some(Number::Int(i64::from(*b))),
            Literal::Int(v) => Some(Number::Int(*v)),
            Literal::Float(v) => Some(Number::Float(*v)),
            _ => None,
        }
    }

    /// Output equality used to judge test cases.
    ///
    /// Numbers compare across int/float/bool as Python does; floats use
    /// [`FLOAT_REL_TOL`] and [`FLOAT_ABS_TOL`]. NaN equals NaN so the relation
    /// stays reflexive. Containers compare element-wise; lists never equal
    /// tuples.
    pub fn output_eq(&self, other: &Literal) -> bool {
        if let (Some(a), Some(b)) = (self.as_number(), other.as_number()) {
            return numbers_eq(a, b);
        }
        match (self, other) {
            (Literal::None, Literal::None) => true,
            (Literal::Str(a), Literal::Str(b)) => a == b,
            (Literal::List(a), Literal::List(b)) | (Literal::Tuple(a), Literal::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.output_eq(y))
            }
            (Literal::Dict(a), Literal::Dict(b)) => {
                a.len() == b.len()
                    && a.iter().all(|(ka, va)| {
                        b.iter()
                            .find(|(kb, _)| ka.output_eq(kb))
                            .is_some_and(|(_, vb)| va.output_eq(vb))
                    })
            }
            _ => false,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Clone, Copy)]
enum Number {
    Int(i64),
    Float(f64),
}

fn numbers_eq(a: Number, b: Number) -> bool {
    match (a, b) {
        (Number::Int(x), Number::Int(y)) => x == y,
        (Number::Int(x), Number::Float(y)) | (Number::Float(y), Number::Int(x)) => {
            floats_eq(x as f64, y)
        }
        (Number::Float(x), Number::Float(y)) => floats_eq(x, y),
    }
}

/// Float comparison under the module tolerances.
pub fn floats_eq(a: f64, b: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    let diff = (a - b).abs();
    diff <= FLOAT_ABS_TOL || diff <= FLOAT_REL_TOL * a.abs().max(b.abs())
}

fn render_seq(items: &[Literal], out: &mut String) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        item.render_into(out);
    }
}

/// Python `repr` of a float: shortest round-trip digits, fixed notation for
/// magnitudes in `[1e-4, 1e16)`, scientific otherwise.
pub fn render_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let magnitude = v.abs();
    if magnitude == 0.0 || (1e-4..1e16).contains(&magnitude) {
        let mut s = format!("{v}");
        if !s.contains('.') {
            s.push_str(".0");
        }
        return s;
    }
    let sci = format!("{v:e}");
    let (mantissa, exponent) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    let sign = if exponent < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exponent.abs())
}

/// Python `repr` of a string.
pub fn render_str(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            c if (0x80..0xa0).contains(&(c as u32)) => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// Total order on canonical renderings; used for stable sorting.
pub fn canonical_cmp(a: &Literal, b: &Literal) -> Ordering {
    a.render().cmp(&b.render())
}

/// Byte cursor over literal text. Public to the crate so the assertion parser
/// can parse literals embedded in larger lines.
pub(crate) struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    pub(crate) fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    pub(crate) fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let ch = self.peek()?;
        self.pos += ch.len_utf8();
        Some(ch)
    }

    pub(crate) fn skip_ws(&mut self) {
        while let Some(ch) = self.peek() {
            if ch.is_whitespace() {
                self.pos += ch.len_utf8();
            } else {
                break;
            }
        }
    }

    pub(crate) fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    pub(crate) fn error(&self, message: &str) -> LiteralError {
        LiteralError { offset: self.pos, message: message.to_string(), non_literal: false }
    }

    fn non_literal(&self, message: &str) -> LiteralError {
        LiteralError { offset: self.pos, message: message.to_string(), non_literal: true }
    }

    pub(crate) fn identifier(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let mut end = 0;
        for (i, ch) in rest.char_indices() {
            let ok = if i == 0 { ch == '_' || ch.is_alphabetic() } else { ch == '_' || ch.is_alphanumeric() };
            if !ok {
                break;
            }
            end = i + ch.len_utf8();
        }
        if end == 0 {
            return None;
        }
        self.pos += end;
        Some(&rest[..end])
    }

    pub(crate) fn literal(&mut self) -> Result<Literal, LiteralError> {
        self.skip_ws();
        let Some(ch) = self.peek() else {
            return Err(self.error("expected a literal, found end of input"));
        };
        match ch {
            '[' => {
                self.bump();
                let items = self.sequence(']')?;
                Ok(Literal::List(items.0))
            }
            '(' => {
                self.bump();
                let (items, trailing_comma) = self.sequence(')')?;
                if items.len() == 1 && !trailing_comma {
                    Ok(items.into_iter().next().expect("one item"))
                } else {
                    Ok(Literal::Tuple(items))
                }
            }
            '{' => {
                self.bump();
                self.dict()
            }
            '\'' | '"' => self.string(),
            '-' | '+' => {
                self.bump();
                self.skip_ws();
                let negate = ch == '-';
                match self.peek() {
                    Some(c) if c.is_ascii_digit() || c == '.' => self.number(negate),
                    Some('i') if self.rest().starts_with("inf") => {
                        self.pos += 3;
                        Ok(Literal::Float(if negate { f64::NEG_INFINITY } else { f64::INFINITY }))
                    }
                    _ => Err(self.non_literal("unary operator applied to a non-number")),
                }
            }
            c if c.is_ascii_digit() || c == '.' => self.number(false),
            c if c == '_' || c.is_alphabetic() => {
                let start = self.pos;
                let word = self.identifier().expect("starts with identifier char");
                let value = match word {
                    "None" => Literal::None,
                    "True" => Literal::Bool(true),
                    "False" => Literal::Bool(false),
                    "inf" => Literal::Float(f64::INFINITY),
                    "nan" => Literal::Float(f64::NAN),
                    _ => {
                        self.pos = start;
                        return Err(self.non_literal("name is not a literal"));
                    }
                };
                Ok(value)
            }
            _ => Err(self.error("unexpected character")),
        }
    }

    /// Parses comma-separated literals up to `close`; reports whether a
    /// trailing comma was present.
    fn sequence(&mut self, close: char) -> Result<(Vec<Literal>, bool), LiteralError> {
        let mut items = Vec::new();
        let mut trailing = false;
        loop {
            self.skip_ws();
            if self.peek() == Some(close) {
                self.bump();
                return Ok((items, trailing));
            }
            items.push(self.literal()?);
            self.skip_ws();
            match self.bump() {
                Some(',') => trailing = true,
                Some(c) if c == close => return Ok((items, false)),
                _ => return Err(self.error("expected ',' or closing bracket")),
            }
        }
    }

    fn dict(&mut self) -> Result<Literal, LiteralError> {
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some('}') {
                self.bump();
                return Ok(Literal::Dict(entries));
            }
            let key = self.literal()?;
            if !self.eat(":") {
                return Err(self.error("expected ':' in map literal"));
            }
            let value = self.literal()?;
            entries.push((key, value));
            self.skip_ws();
            match self.bump() {
                Some(',') => {}
                Some('}') => return Ok(Literal::Dict(entries)),
                _ => return Err(self.error("expected ',' or '}' in map literal")),
            }
        }
    }

    fn number(&mut self, negate: bool) -> Result<Literal, LiteralError> {
        let start = self.pos;
        let rest = self.rest();
        let mut end = 0;
        let mut is_float = false;
        let bytes = rest.as_bytes();
        while end < bytes.len() {
            let b = bytes[end];
            match b {
                b'0'..=b'9' | b'_' => end += 1,
                b'.' => {
                    is_float = true;
                    end += 1;
                }
                b'e' | b'E' => {
                    is_float = true;
                    end += 1;
                    if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
                        end += 1;
                    }
                }
                _ => break,
            }
        }
        let text: String = rest[..end].chars().filter(|c| *c != '_').collect();
        self.pos += end;
        if matches!(self.peek(), Some(c) if c.is_alphabetic() || c == '(') {
            self.pos = start;
            return Err(self.non_literal("number followed by name or call"));
        }
        if is_float {
            let v: f64 = text.parse().map_err(|_| LiteralError {
                offset: start,
                message: format!("malformed float {text:?}"),
                non_literal: false,
            })?;
            Ok(Literal::Float(if negate { -v } else { v }))
        } else {
            let signed = if negate { format!("-{text}") } else { text.clone() };
            let v: i64 = signed.parse().map_err(|_| LiteralError {
                offset: start,
                message: format!("integer {text:?} is malformed or out of range"),
                non_literal: false,
            })?;
            Ok(Literal::Int(v))
        }
    }

    fn string(&mut self) -> Result<Literal, LiteralError> {
        let quote = self.bump().expect("caller checked quote");
        let mut out = String::new();
        loop {
            let Some(ch) = self.bump() else {
                return Err(self.error("unterminated string"));
            };
            match ch {
                c if c == quote => return Ok(Literal::Str(out)),
                '\n' => return Err(self.error("newline in string literal")),
                '\\' => {
                    let Some(esc) = self.bump() else {
                        return Err(self.error("dangling escape"));
                    };
                    match esc {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '0' => out.push('\0'),
                        '\\' => out.push('\\'),
                        '\'' => out.push('\''),
                        '"' => out.push('"'),
                        'x' => out.push(self.hex_escape(2)?),
                        'u' => out.push(self.hex_escape(4)?),
                        'U' => out.push(self.hex_escape(8)?),
                        other => {
                            out.push('\\');
                            out.push(other);
                        }
                    }
                }
                c => out.push(c),
            }
        }
    }

    fn hex_escape(&mut self, digits: usize) -> Result<char, LiteralError> {
        let rest = self.rest();
        if rest.len() < digits || !rest.is_char_boundary(digits) {
            return Err(self.error("truncated escape"));
        }
        let code = u32::from_str_radix(&rest[..digits], 16).map_err(|_| self.error("bad hex escape"))?;
        self.pos += digits;
        char::from_u32(code).ok_or_else(|| self.error("escape is not a scalar value"))
    }
}
