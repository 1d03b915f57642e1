//! Methods of the builtin types.

use std::cmp::Ordering;
use std::rc::Rc;

use super::builtins::{counter_update, expect_int, sort_values, Args};
use super::interp::{check_growth, Interp};
use super::ops::format_value;
use super::value::*;

const STR_METHODS: &[&str] = &[
    "lower", "upper", "strip", "lstrip", "rstrip", "split", "rsplit", "join", "replace", "startswith", "endswith",
    "find", "rfind", "index", "rindex", "count", "isdigit", "isalpha", "isalnum", "isspace", "isupper", "islower",
    "isdecimal", "isnumeric", "title", "capitalize", "swapcase", "center", "ljust", "rjust", "zfill", "format",
    "splitlines", "partition", "rpartition", "casefold", "removeprefix", "removesuffix", "istitle",
];
const LIST_METHODS: &[&str] = &[
    "append", "extend", "insert", "pop", "remove", "index", "count", "sort", "reverse", "copy", "clear",
    "appendleft", "popleft", "extendleft", "rotate",
];
const TUPLE_METHODS: &[&str] = &["index", "count"];
const DICT_METHODS: &[&str] = &[
    "get", "keys", "values", "items", "pop", "popitem", "setdefault", "update", "copy", "clear", "most_common",
    "elements", "subtract", "total", "move_to_end",
];
const SET_METHODS: &[&str] = &[
    "add", "remove", "discard", "pop", "union", "intersection", "difference", "symmetric_difference", "issubset",
    "issuperset", "isdisjoint", "update", "intersection_update", "difference_update", "symmetric_difference_update",
    "copy", "clear",
];

pub fn has_method(type_name: &str, name: &str) -> bool {
    let table: &[&str] = match type_name {
        "str" => STR_METHODS,
        "list" => LIST_METHODS,
        "tuple" => TUPLE_METHODS,
        "dict" => DICT_METHODS,
        "set" => SET_METHODS,
        "int" => &["bit_length", "bit_count", "conjugate"],
        "float" => &["is_integer", "conjugate"],
        _ => &[],
    };
    table.contains(&name)
}

pub fn call_method(
    interp: &mut Interp,
    receiver: &Value,
    name: &str,
    positional: Vec<Value>,
    keywords: Vec<(String, Value)>,
) -> PyResult {
    let mut a = Args::new(name, positional, keywords);
    match receiver {
        Value::Str(s) => str_method(interp, s, &mut a),
        Value::List(l) => list_method(interp, l, &mut a),
        Value::Tuple(t) => {
            a.finish()?;
            seq_method(&t.items, &mut a)
        }
        Value::Dict(d) => dict_method(interp, d, &mut a),
        Value::Set(s) => set_method(interp, s, &mut a),
        Value::Cached(c) if name == "cache_clear" => {
            c.memo.borrow_mut().clear();
            Ok(Value::None)
        }
        Value::Int(_) | Value::Bool(_) => {
            let n = receiver.as_int().unwrap_or(0);
            match name {
                "bit_length" => Ok(Value::Int(64 - i64::from(n.unsigned_abs().leading_zeros()))),
                "bit_count" => Ok(Value::Int(i64::from(n.unsigned_abs().count_ones()))),
                _ => Ok(Value::Int(n)),
            }
        }
        Value::Float(f) => match name {
            "is_integer" => Ok(Value::Bool(f.is_finite() && f.fract() == 0.0)),
            _ => Ok(Value::Float(*f)),
        },
        other => Err(exc("AttributeError", format!("'{}' object has no attribute '{name}'", other.type_name()))),
    }
}

fn no_attr(type_name: &str, name: &str) -> Flow {
    exc("AttributeError", format!("'{type_name}' object has no attribute '{name}'"))
}

fn seq_method(items: &[Value], a: &mut Args) -> PyResult {
    match a.name.as_str() {
        "count" => {
            a.arity(1, 1)?;
            Ok(Value::Int(items.iter().filter(|v| v.py_eq(&a.positional[0])).count() as i64))
        }
        "index" => {
            a.arity(1, 3)?;
            let len = items.len() as i64;
            let clamp = |v: i64| if v < 0 { (v + len).max(0) } else { v.min(len) } as usize;
            let start = if a.positional.len() > 1 { clamp(a.int(1)?) } else { 0 };
            let stop = if a.positional.len() > 2 { clamp(a.int(2)?) } else { items.len() };
            (start..stop.max(start))
                .find(|&i| items[i].py_eq(&a.positional[0]))
                .map(|i| Value::Int(i as i64))
                .ok_or_else(|| value_error(format!("{} is not in list", a.positional[0].repr())))
        }
        other => Err(no_attr("tuple", other)),
    }
}

// ---- str ----

fn char_offset(text: &str, byte: usize) -> i64 {
    if text.is_ascii() {
        byte as i64
    } else {
        text[..byte].chars().count() as i64
    }
}

/// Byte range of the char-indexed `[start, end)` window, CPython-style clamping.
fn char_window(text: &str, start: Option<&Value>, end: Option<&Value>) -> PyResult<(usize, usize)> {
    let len = if text.is_ascii() { text.len() } else { text.chars().count() } as i64;
    let clamp = |v: Option<&Value>, default: i64| -> PyResult<i64> {
        match v {
            None | Some(Value::None) => Ok(default),
            Some(v) => {
                let i = expect_int(v, "slice")?;
                Ok(if i < 0 { (i + len).max(0) } else { i.min(len) })
            }
        }
    };
    let (s, e) = (clamp(start, 0)?, clamp(end, len)?);
    let to_byte = |c: i64| -> usize {
        if text.is_ascii() {
            c as usize
        } else {
            text.char_indices().nth(c as usize).map_or(text.len(), |(b, _)| b)
        }
    };
    let (s, e) = (to_byte(s), to_byte(e.max(s)));
    Ok((s, e))
}

fn str_arg<'a>(v: &'a Value, func: &str) -> PyResult<&'a str> {
    v.as_str().ok_or_else(|| type_error(format!("{func}() argument must be str, not {}", v.type_name())))
}

fn strip_chars<'a>(text: &'a str, chars: Option<&Value>, left: bool, right: bool) -> PyResult<&'a str> {
    let set: Option<Vec<char>> = match chars {
        None | Some(Value::None) => None,
        Some(v) => Some(str_arg(v, "strip")?.chars().collect()),
    };
    let test = |c: char| match &set {
        None => c.is_whitespace(),
        Some(s) => s.contains(&c),
    };
    let mut out = text;
    if left {
        out = out.trim_start_matches(test);
    }
    if right {
        out = out.trim_end_matches(test);
    }
    Ok(out)
}

fn split_whitespace_n(text: &str, maxsplit: i64, from_right: bool) -> Vec<String> {
    if maxsplit < 0 {
        return text.split_whitespace().map(str::to_string).collect();
    }
    let mut parts = Vec::new();
    if from_right {
        let mut rest = text.trim_end();
        while !rest.is_empty() && (parts.len() as i64) < maxsplit {
            match rest.rfind(char::is_whitespace) {
                Some(i) => {
                    let ws_len = rest[i..].chars().next().map_or(1, char::len_utf8);
                    parts.push(rest[i + ws_len..].to_string());
                    rest = rest[..i].trim_end();
                }
                None => break,
            }
        }
        if !rest.is_empty() {
            parts.push(rest.to_string());
        }
        parts.reverse();
    } else {
        let mut rest = text.trim_start();
        while !rest.is_empty() && (parts.len() as i64) < maxsplit {
            match rest.find(char::is_whitespace) {
                Some(i) => {
                    parts.push(rest[..i].to_string());
                    rest = rest[i..].trim_start();
                }
                None => break,
            }
        }
        if !rest.is_empty() {
            parts.push(rest.to_string());
        }
    }
    parts
}

fn title_case(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev_cased = false;
    for c in text.chars() {
        if c.is_alphabetic() {
            if prev_cased {
                out.extend(c.to_lowercase());
            } else {
                out.extend(c.to_uppercase());
            }
            prev_cased = true;
        } else {
            out.push(c);
            prev_cased = false;
        }
    }
    out
}

fn str_list(parts: Vec<String>) -> PyResult {
    let values = parts.into_iter().map(Value::str).collect::<PyResult<Vec<_>>>()?;
    Value::list(values)
}

fn cased(text: &str) -> (bool, bool, bool) {
    let has_cased = text.chars().any(|c| c.is_lowercase() || c.is_uppercase());
    let all_upper = !text.chars().any(char::is_lowercase);
    let all_lower = !text.chars().any(char::is_uppercase);
    (has_cased, all_upper, all_lower)
}

fn str_method(interp: &mut Interp, s: &Rc<StrObj>, a: &mut Args) -> PyResult {
    let text = s.text.as_str();
    let name = a.name.clone();
    if name == "format" {
        let positional = std::mem::take(&mut a.positional);
        let keywords = std::mem::take(&mut a.keywords);
        return Value::str(str_format(text, &positional, &keywords)?);
    }
    if name == "split" || name == "rsplit" {
        let sep = a.arg(0, "sep").filter(|v| !matches!(v, Value::None));
        let maxsplit = a.arg(1, "maxsplit").map(|v| expect_int(&v, "split")).transpose()?.unwrap_or(-1);
        a.finish()?;
        let from_right = name == "rsplit";
        return match sep {
            None => str_list(split_whitespace_n(text, maxsplit, from_right)),
            Some(sep) => {
                let sep = str_arg(&sep, &name)?;
                if sep.is_empty() {
                    return Err(value_error("empty separator"));
                }
                let parts: Vec<String> = match (maxsplit < 0, from_right) {
                    (true, _) => text.split(sep).map(str::to_string).collect(),
                    (false, false) => text.splitn(maxsplit as usize + 1, sep).map(str::to_string).collect(),
                    (false, true) => {
                        let mut p: Vec<String> = text.rsplitn(maxsplit as usize + 1, sep).map(str::to_string).collect();
                        p.reverse();
                        p
                    }
                };
                str_list(parts)
            }
        };
    }
    a.finish()?;
    let p = &a.positional;
    let result = match name.as_str() {
        "lower" | "casefold" => text.to_lowercase(),
        "upper" => text.to_uppercase(),
        "swapcase" => text
            .chars()
            .flat_map(|c| -> Vec<char> {
                if c.is_uppercase() {
                    c.to_lowercase().collect()
                } else {
                    c.to_uppercase().collect()
                }
            })
            .collect(),
        "title" => title_case(text),
        "capitalize" => {
            let mut chars = text.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            }
        }
        "strip" | "lstrip" | "rstrip" => {
            a.arity(0, 1)?;
            strip_chars(text, p.first(), name != "rstrip", name != "lstrip")?.to_string()
        }
        "removeprefix" => {
            a.arity(1, 1)?;
            let prefix = str_arg(&p[0], &name)?;
            text.strip_prefix(prefix).unwrap_or(text).to_string()
        }
        "removesuffix" => {
            a.arity(1, 1)?;
            let suffix = str_arg(&p[0], &name)?;
            text.strip_suffix(suffix).unwrap_or(text).to_string()
        }
        "join" => {
            a.arity(1, 1)?;
            let items = interp.collect(&p[0])?;
            let mut out = String::new();
            for (i, item) in items.iter().enumerate() {
                let Some(piece) = item.as_str() else {
                    return Err(type_error(format!(
                        "sequence item {i}: expected str instance, {} found",
                        item.type_name()
                    )));
                };
                if i > 0 {
                    out.push_str(text);
                }
                out.push_str(piece);
                super::ops::ensure_room(out.len())?;
            }
            out
        }
        "replace" => {
            a.arity(2, 3)?;
            let (old, new) = (str_arg(&p[0], &name)?, str_arg(&p[1], &name)?);
            let count = if p.len() == 3 { a.int(2)? } else { -1 };
            let occurrences = if old.is_empty() { text.chars().count() + 1 } else { text.matches(old).count() };
            let replaced = if count < 0 { occurrences } else { occurrences.min(count as usize) };
            let growth = replaced.saturating_mul(new.len().saturating_sub(old.len()));
            super::ops::ensure_room(text.len().saturating_add(growth))?;
            if count < 0 {
                text.replace(old, new)
            } else {
                text.replacen(old, new, count as usize)
            }
        }
        "startswith" | "endswith" => {
            a.arity(1, 3)?;
            let (lo, hi) = char_window(text, p.get(1), p.get(2))?;
            let window = &text[lo..hi];
            let candidates: Vec<Value> = match &p[0] {
                Value::Tuple(t) => t.items.clone(),
                v => vec![v.clone()],
            };
            for c in &candidates {
                let c = str_arg(c, &name)?;
                let hit = if name == "startswith" { window.starts_with(c) } else { window.ends_with(c) };
                if hit {
                    return Ok(Value::Bool(true));
                }
            }
            return Ok(Value::Bool(false));
        }
        "find" | "rfind" | "index" | "rindex" | "count" => {
            a.arity(1, 3)?;
            let needle = str_arg(&p[0], &name)?;
            let (lo, hi) = char_window(text, p.get(1), p.get(2))?;
            let window = &text[lo..hi];
            if name == "count" {
                let n = if needle.is_empty() { window.chars().count() + 1 } else { window.matches(needle).count() };
                return Ok(Value::Int(n as i64));
            }
            let found = if name.starts_with('r') { window.rfind(needle) } else { window.find(needle) };
            return match found {
                Some(b) => Ok(Value::Int(char_offset(text, lo + b))),
                None if name.ends_with("index") => Err(value_error("substring not found")),
                None => Ok(Value::Int(-1)),
            };
        }
        "isdigit" | "isdecimal" | "isnumeric" => {
            return Ok(Value::Bool(!text.is_empty() && text.chars().all(|c| c.is_numeric())))
        }
        "isalpha" => return Ok(Value::Bool(!text.is_empty() && text.chars().all(char::is_alphabetic))),
        "isalnum" => return Ok(Value::Bool(!text.is_empty() && text.chars().all(char::is_alphanumeric))),
        "isspace" => return Ok(Value::Bool(!text.is_empty() && text.chars().all(char::is_whitespace))),
        "isupper" => {
            let (has, upper, _) = cased(text);
            return Ok(Value::Bool(has && upper));
        }
        "islower" => {
            let (has, _, lower) = cased(text);
            return Ok(Value::Bool(has && lower));
        }
        "istitle" => return Ok(Value::Bool(cased(text).0 && title_case(text) == text)),
        "center" | "ljust" | "rjust" => {
            a.arity(1, 2)?;
            let width = a.int(0)?.max(0) as usize;
            let fill = match p.get(1) {
                Some(v) => {
                    let f = str_arg(v, &name)?;
                    let mut chars = f.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => c,
                        _ => return Err(type_error("The fill character must be exactly one character long")),
                    }
                }
                None => ' ',
            };
            let len = s.chars_len();
            if width <= len {
                text.to_string()
            } else {
                super::ops::ensure_room(width)?;
                let total = width - len;
                let (left, right) = match name.as_str() {
                    "ljust" => (0, total),
                    "rjust" => (total, 0),
                    // CPython puts the extra fill char on the left when width is odd
                    _ => {
                        let left = total / 2 + (total & width & 1);
                        (left, total - left)
                    }
                };
                let fill_str = |n: usize| std::iter::repeat_n(fill, n).collect::<String>();
                format!("{}{text}{}", fill_str(left), fill_str(right))
            }
        }
        "zfill" => {
            a.arity(1, 1)?;
            let width = a.int(0)?.max(0) as usize;
            let len = s.chars_len();
            if width <= len {
                text.to_string()
            } else {
                super::ops::ensure_room(width)?;
                let zeros = "0".repeat(width - len);
                match text.chars().next() {
                    Some(sign @ ('+' | '-')) => format!("{sign}{zeros}{}", &text[1..]),
                    _ => format!("{zeros}{text}"),
                }
            }
        }
        "splitlines" => {
            a.arity(0, 1)?;
            let keep = p.first().is_some_and(Value::truthy);
            let mut parts = Vec::new();
            let mut rest = text;
            while !rest.is_empty() {
                match rest.find(['\n', '\r']) {
                    Some(i) => {
                        let brk = if rest[i..].starts_with("\r\n") { 2 } else { 1 };
                        parts.push(rest[..if keep { i + brk } else { i }].to_string());
                        rest = &rest[i + brk..];
                    }
                    None => {
                        parts.push(rest.to_string());
                        break;
                    }
                }
            }
            return str_list(parts);
        }
        "partition" | "rpartition" => {
            a.arity(1, 1)?;
            let sep = str_arg(&p[0], &name)?;
            if sep.is_empty() {
                return Err(value_error("empty separator"));
            }
            let found = if name == "partition" { text.find(sep) } else { text.rfind(sep) };
            let (x, y, z) = match found {
                Some(i) => (&text[..i], sep, &text[i + sep.len()..]),
                None if name == "partition" => (text, "", ""),
                None => ("", "", text),
            };
            return Value::tuple(vec![Value::str(x)?, Value::str(y)?, Value::str(z)?]);
        }
        other => return Err(no_attr("str", other)),
    };
    Value::str(result)
}

/// `str.format` with auto/explicit numbering, names, `[index]` / `.attr`
/// field access, `!r`/`!s` conversions and nested specs.
pub fn str_format(template: &str, positional: &[Value], keywords: &[(String, Value)]) -> PyResult<String> {
    let mut out = String::new();
    let mut auto = 0usize;
    let chars: Vec<char> = template.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '}' {
            if chars.get(i + 1) == Some(&'}') {
                out.push('}');
                i += 2;
                continue;
            }
            return Err(value_error("Single '}' encountered in format string"));
        }
        if c != '{' {
            out.push(c);
            i += 1;
            continue;
        }
        if chars.get(i + 1) == Some(&'{') {
            out.push('{');
            i += 2;
            continue;
        }
        let mut depth = 1;
        let mut j = i + 1;
        while j < chars.len() && depth > 0 {
            match chars[j] {
                '{' => depth += 1,
                '}' => depth -= 1,
                _ => {}
            }
            j += 1;
        }
        if depth != 0 {
            return Err(value_error("Single '{' encountered in format string"));
        }
        let field: String = chars[i + 1..j - 1].iter().collect();
        i = j;
        let (head, spec) = match field.find(':') {
            Some(k) => (&field[..k], &field[k + 1..]),
            None => (field.as_str(), ""),
        };
        let (name, conversion) = match head.find('!') {
            Some(k) => (&head[..k], Some(&head[k + 1..])),
            None => (head, None),
        };
        let split = name.find(['.', '[']).unwrap_or(name.len());
        let (base, mut accessors) = (&name[..split], &name[split..]);
        let mut value = if base.is_empty() {
            let v = positional.get(auto).cloned();
            auto += 1;
            v.ok_or_else(|| exc("IndexError", format!("Replacement index {} out of range for positional args tuple", auto - 1)))?
        } else if let Ok(index) = base.parse::<usize>() {
            positional.get(index).cloned().ok_or_else(|| {
                exc("IndexError", format!("Replacement index {index} out of range for positional args tuple"))
            })?
        } else {
            keywords
                .iter()
                .find(|(k, _)| k == base)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| exc("KeyError", format!("'{base}'")))?
        };
        while !accessors.is_empty() {
            if let Some(rest) = accessors.strip_prefix('[') {
                let close = rest.find(']').ok_or_else(|| value_error("Missing ']' in format string"))?;
                let key = &rest[..close];
                let index = match key.parse::<i64>() {
                    Ok(n) => Value::Int(n),
                    Err(_) => Value::str(key)?,
                };
                value = index_plain(&value, &index)?;
                accessors = &rest[close + 1..];
            } else {
                return Err(value_error("attribute access in format fields is not supported"));
            }
        }
        let value = match conversion {
            Some("r") | Some("a") => Value::str(value.repr())?,
            Some("s") => Value::str(value.to_str())?,
            None => value,
            Some(other) => return Err(value_error(format!("Unknown conversion specifier {other}"))),
        };
        let spec = if spec.contains('{') { str_format(spec, positional, keywords)? } else { spec.to_string() };
        out.push_str(&format_value(&value, &spec)?);
        super::ops::ensure_room(out.len())?;
    }
    Ok(out)
}

fn index_plain(container: &Value, index: &Value) -> PyResult {
    match (container, index) {
        (Value::List(l), Value::Int(i)) => {
            let items = l.items.borrow();
            let n = items.len() as i64;
            let k = if *i < 0 { i + n } else { *i };
            items.get(k as usize).filter(|_| k >= 0).cloned().ok_or_else(|| exc("IndexError", "list index out of range"))
        }
        (Value::Tuple(t), Value::Int(i)) => {
            let n = t.items.len() as i64;
            let k = if *i < 0 { i + n } else { *i };
            t.items.get(k as usize).filter(|_| k >= 0).cloned().ok_or_else(|| exc("IndexError", "tuple index out of range"))
        }
        (Value::Dict(d), key) => d.get(&key.hash_key()?).ok_or_else(|| exc("KeyError", key.repr())),
        (other, _) => Err(type_error(format!("'{}' object is not subscriptable", other.type_name()))),
    }
}

// ---- list ----

fn list_method(interp: &mut Interp, l: &Rc<ListObj>, a: &mut Args) -> PyResult {
    let name = a.name.clone();
    if name == "sort" {
        let key = a.kw("key");
        let reverse = a.kw("reverse").is_some_and(|v| v.truthy());
        a.finish()?;
        a.arity(0, 0)?;
        let items = l.items.borrow().clone();
        let sorted = sort_values(interp, items, key, reverse)?;
        *l.items.borrow_mut() = sorted;
        return Ok(Value::None);
    }
    a.finish()?;
    let p = a.positional.clone();
    match name.as_str() {
        "append" | "appendleft" => {
            a.arity(1, 1)?;
            let len = l.items.borrow().len();
            check_growth(len)?;
            if name == "append" {
                l.items.borrow_mut().push(p[0].clone());
            } else {
                l.items.borrow_mut().insert(0, p[0].clone());
            }
            l.sync()?;
            Ok(Value::None)
        }
        "extend" | "extendleft" => {
            a.arity(1, 1)?;
            let mut items = interp.collect(&p[0])?;
            let len = l.items.borrow().len();
            check_growth(len + items.len())?;
            if name == "extend" {
                l.items.borrow_mut().extend(items);
            } else {
                items.reverse();
                l.items.borrow_mut().splice(0..0, items);
            }
            l.sync()?;
            Ok(Value::None)
        }
        "insert" => {
            a.arity(2, 2)?;
            let len = l.items.borrow().len() as i64;
            let i = a.int(0)?;
            let i = if i < 0 { (i + len).max(0) } else { i.min(len) } as usize;
            check_growth(len as usize)?;
            l.items.borrow_mut().insert(i, p[1].clone());
            l.sync()?;
            Ok(Value::None)
        }
        "pop" | "popleft" => {
            a.arity(0, 1)?;
            let mut items = l.items.borrow_mut();
            if items.is_empty() {
                return Err(exc("IndexError", if name == "pop" { "pop from empty list" } else { "pop from an empty deque" }));
            }
            let len = items.len() as i64;
            let i = if name == "popleft" {
                0
            } else if p.is_empty() {
                len - 1
            } else {
                let i = a.int(0)?;
                if i < 0 { i + len } else { i }
            };
            if i < 0 || i >= len {
                return Err(exc("IndexError", "pop index out of range"));
            }
            let v = items.remove(i as usize);
            drop(items);
            l.sync()?;
            Ok(v)
        }
        "remove" => {
            a.arity(1, 1)?;
            let pos = l.items.borrow().iter().position(|v| v.py_eq(&p[0]));
            match pos {
                Some(i) => {
                    l.items.borrow_mut().remove(i);
                    l.sync()?;
                    Ok(Value::None)
                }
                None => Err(value_error("list.remove(x): x not in list")),
            }
        }
        "index" | "count" => {
            let items = l.items.borrow().clone();
            seq_method(&items, a)
        }
        "reverse" => {
            l.items.borrow_mut().reverse();
            Ok(Value::None)
        }
        "rotate" => {
            a.arity(0, 1)?;
            let n = if p.is_empty() { 1 } else { a.int(0)? };
            let mut items = l.items.borrow_mut();
            let len = items.len() as i64;
            if len > 0 {
                let k = n.rem_euclid(len) as usize;
                items.rotate_right(k);
            }
            Ok(Value::None)
        }
        "copy" => {
            let items = l.items.borrow().clone();
            Value::list(items)
        }
        "clear" => {
            l.items.borrow_mut().clear();
            l.sync()?;
            Ok(Value::None)
        }
        other => Err(no_attr("list", other)),
    }
}

// ---- dict ----

fn dict_method(interp: &mut Interp, d: &Rc<DictObj>, a: &mut Args) -> PyResult {
    let name = a.name.clone();
    if name == "update" {
        a.arity(0, 1)?;
        if d.kind == DictKind::Counter {
            if let Some(src) = a.positional.first() {
                counter_update(interp, d, src)?;
            }
        } else if let Some(src) = a.positional.first() {
            let entries: Vec<(Value, Value)> = match src {
                Value::Dict(other) => other.map.borrow().values().cloned().collect(),
                other => {
                    let pairs = interp.collect(other)?;
                    let mut entries = Vec::with_capacity(pairs.len());
                    for pair in pairs {
                        let kv = interp.collect(&pair)?;
                        if kv.len() != 2 {
                            return Err(value_error("dictionary update sequence element has wrong length"));
                        }
                        entries.push((kv[0].clone(), kv[1].clone()));
                    }
                    entries
                }
            };
            for (k, v) in entries {
                d.insert(k, v)?;
            }
        }
        for (k, v) in std::mem::take(&mut a.keywords) {
            d.insert(Value::str(k)?, v)?;
        }
        return Ok(Value::None);
    }
    a.finish()?;
    let p = a.positional.clone();
    match name.as_str() {
        "get" => {
            a.arity(1, 2)?;
            Ok(d.get(&p[0].hash_key()?).unwrap_or_else(|| p.get(1).cloned().unwrap_or(Value::None)))
        }
        "keys" => Value::list(d.map.borrow().values().map(|(k, _)| k.clone()).collect()),
        "values" => Value::list(d.map.borrow().values().map(|(_, v)| v.clone()).collect()),
        "items" => {
            let pairs: Vec<(Value, Value)> = d.map.borrow().values().cloned().collect();
            let items = pairs.into_iter().map(|(k, v)| Value::tuple(vec![k, v])).collect::<PyResult<Vec<_>>>()?;
            Value::list(items)
        }
        "pop" => {
            a.arity(1, 2)?;
            let removed = d.map.borrow_mut().shift_remove(&p[0].hash_key()?);
            d.sync()?;
            match removed {
                Some((_, v)) => Ok(v),
                None => p.get(1).cloned().ok_or_else(|| exc("KeyError", p[0].repr())),
            }
        }
        "popitem" => {
            let last = d.map.borrow_mut().pop();
            d.sync()?;
            match last {
                Some((_, (k, v))) => Value::tuple(vec![k, v]),
                None => Err(exc("KeyError", "'popitem(): dictionary is empty'")),
            }
        }
        "setdefault" => {
            a.arity(1, 2)?;
            let key = p[0].hash_key()?;
            if let Some(v) = d.get(&key) {
                return Ok(v);
            }
            let v = p.get(1).cloned().unwrap_or(Value::None);
            d.insert(p[0].clone(), v.clone())?;
            Ok(v)
        }
        "copy" => {
            let entries = d.map.borrow().values().cloned().collect();
            Value::dict_of(d.kind, d.default_factory.clone(), entries)
        }
        "clear" => {
            d.map.borrow_mut().clear();
            d.sync()?;
            Ok(Value::None)
        }
        "move_to_end" => {
            a.arity(1, 2)?;
            let key = p[0].hash_key()?;
            let last = p.get(1).is_none_or(Value::truthy);
            let mut map = d.map.borrow_mut();
            let Some(i) = map.get_index_of(&key) else { return Err(exc("KeyError", p[0].repr())) };
            let target = if last { map.len() - 1 } else { 0 };
            map.move_index(i, target);
            Ok(Value::None)
        }
        "most_common" | "elements" | "subtract" | "total" if d.kind == DictKind::Counter => {
            counter_method(interp, d, &name, &p)
        }
        other => Err(no_attr("dict", other)),
    }
}

fn counter_method(interp: &mut Interp, d: &Rc<DictObj>, name: &str, p: &[Value]) -> PyResult {
    let entries: Vec<(Value, Value)> = d.map.borrow().values().cloned().collect();
    match name {
        "most_common" => {
            let sorted = super::builtins::merge_sort(entries, &mut |x, y| {
                Ok(x.1.py_cmp(&y.1)? == Ordering::Greater)
            })?;
            let n = match p.first() {
                None | Some(Value::None) => sorted.len(),
                Some(v) => expect_int(v, "most_common")?.max(0) as usize,
            };
            let items = sorted.into_iter().take(n).map(|(k, v)| Value::tuple(vec![k, v])).collect::<PyResult<Vec<_>>>()?;
            Value::list(items)
        }
        "elements" => {
            let mut out = Vec::new();
            for (k, v) in entries {
                for _ in 0..v.as_int().unwrap_or(0).max(0) {
                    check_growth(out.len())?;
                    out.push(k.clone());
                }
            }
            Value::iter_of(out)
        }
        "total" => {
            let mut total = Value::Int(0);
            for (_, v) in entries {
                total = super::ops::binop(interp, &total, super::ast::BinOp::Add, &v)?;
            }
            Ok(total)
        }
        _ => {
            let Some(src) = p.first() else { return Ok(Value::None) };
            let pairs: Vec<(Value, Value)> = match src {
                Value::Dict(other) => other.map.borrow().values().cloned().collect(),
                other => interp.collect(other)?.into_iter().map(|k| (k, Value::Int(1))).collect(),
            };
            for (k, v) in pairs {
                let current = d.get(&k.hash_key()?).unwrap_or(Value::Int(0));
                let next = super::ops::binop(interp, &current, super::ast::BinOp::Sub, &v)?;
                d.insert(k, next)?;
            }
            Ok(Value::None)
        }
    }
}

// ---- set ----

fn set_method(interp: &mut Interp, s: &Rc<SetObj>, a: &mut Args) -> PyResult {
    a.finish()?;
    let name = a.name.clone();
    let p = a.positional.clone();
    let others = |interp: &mut Interp| -> PyResult<Vec<Vec<Value>>> { p.iter().map(|v| interp.collect(v)).collect() };
    let current: Vec<Value> = s.map.borrow().values().cloned().collect();
    let keys_of = |items: &[Value]| -> PyResult<std::collections::HashSet<HashKey>> {
        items.iter().map(Value::hash_key).collect()
    };
    match name.as_str() {
        "add" => {
            a.arity(1, 1)?;
            let key = p[0].hash_key()?;
            s.map.borrow_mut().entry(key).or_insert_with(|| p[0].clone());
            s.sync()?;
            Ok(Value::None)
        }
        "remove" | "discard" => {
            a.arity(1, 1)?;
            let removed = s.map.borrow_mut().shift_remove(&p[0].hash_key()?);
            s.sync()?;
            if removed.is_none() && name == "remove" {
                return Err(exc("KeyError", p[0].repr()));
            }
            Ok(Value::None)
        }
        "pop" => {
            let first = s.map.borrow_mut().shift_remove_index(0);
            s.sync()?;
            first.map(|(_, v)| v).ok_or_else(|| exc("KeyError", "'pop from an empty set'"))
        }
        "copy" => Value::set(current),
        "clear" => {
            s.map.borrow_mut().clear();
            s.sync()?;
            Ok(Value::None)
        }
        "union" | "update" => {
            let mut items = current;
            for other in others(interp)? {
                items.extend(other);
            }
            if name == "union" {
                return Value::set(items);
            }
            for v in items {
                let key = v.hash_key()?;
                s.map.borrow_mut().entry(key).or_insert(v);
            }
            s.sync()?;
            Ok(Value::None)
        }
        "intersection" | "intersection_update" | "difference" | "difference_update" => {
            let mut items = current;
            for other in others(interp)? {
                let keys = keys_of(&other)?;
                let keep_common = name.starts_with("intersection");
                let mut kept = Vec::with_capacity(items.len());
                for v in items {
                    if keys.contains(&v.hash_key()?) == keep_common {
                        kept.push(v);
                    }
                }
                items = kept;
            }
            if !name.ends_with("_update") {
                return Value::set(items);
            }
            let rebuilt = items.into_iter().map(|v| Ok((v.hash_key()?, v))).collect::<PyResult<_>>()?;
            *s.map.borrow_mut() = rebuilt;
            s.sync()?;
            Ok(Value::None)
        }
        "symmetric_difference" | "symmetric_difference_update" => {
            a.arity(1, 1)?;
            let other = interp.collect(&p[0])?;
            let (mine, theirs) = (keys_of(&current)?, keys_of(&other)?);
            let mut items = Vec::new();
            for v in current {
                if !theirs.contains(&v.hash_key()?) {
                    items.push(v);
                }
            }
            for v in other {
                if !mine.contains(&v.hash_key()?) {
                    items.push(v);
                }
            }
            if name == "symmetric_difference" {
                return Value::set(items);
            }
            let rebuilt = items.into_iter().map(|v| Ok((v.hash_key()?, v))).collect::<PyResult<_>>()?;
            *s.map.borrow_mut() = rebuilt;
            s.sync()?;
            Ok(Value::None)
        }
        "issubset" | "issuperset" | "isdisjoint" => {
            a.arity(1, 1)?;
            let other = interp.collect(&p[0])?;
            let (mine, theirs) = (keys_of(&current)?, keys_of(&other)?);
            Ok(Value::Bool(match name.as_str() {
                "issubset" => mine.is_subset(&theirs),
                "issuperset" => mine.is_superset(&theirs),
                _ => mine.is_disjoint(&theirs),
            }))
        }
        other => Err(no_attr("set", other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_fields() {
        let args = [Value::Int(3), Value::str_unchecked("x")];
        let kw = [("name".to_string(), Value::Float(1.5))];
        assert_eq!(str_format("{} {}", &args, &kw).unwrap(), "3 x");
        assert_eq!(str_format("{1}{0}", &args, &kw).unwrap(), "x3");
        assert_eq!(str_format("{name:.2f}|{0:>3}", &args, &kw).unwrap(), "1.50|  3");
        assert_eq!(str_format("{{}}{1!r}", &args, &kw).unwrap(), "{}'x'");
        assert!(str_format("{5}", &args, &kw).is_err());
    }

    #[test]
    fn whitespace_split_limits() {
        assert_eq!(split_whitespace_n("  a b  c ", 1, false), vec!["a", "b  c "]);
        assert_eq!(split_whitespace_n("  a b  c ", 1, true), vec!["  a b", "c"]);
        assert_eq!(split_whitespace_n(" a b ", -1, false), vec!["a", "b"]);
    }
}
