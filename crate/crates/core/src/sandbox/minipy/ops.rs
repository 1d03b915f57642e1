//! Operators, item access and string formatting.

use std::cmp::Ordering;
use std::rc::Rc;

use super::ast::{BinOp, CmpOp, UnaryOp};
use super::interp::Interp;
use super::value::*;
use crate::verification::literal::render_float;

pub fn overflow() -> Flow {
    exc("OverflowError", "integer result exceeds 64 bits")
}

fn zero_division(message: &str) -> Flow {
    exc("ZeroDivisionError", message)
}

/// Fails with `Memory` before allocating something that cannot fit.
pub fn ensure_room(bytes: usize) -> PyResult<()> {
    if heap_used().saturating_add(bytes) > heap_limit() {
        Err(Flow::Memory)
    } else {
        Ok(())
    }
}

pub fn int_floordiv(a: i64, b: i64) -> PyResult<i64> {
    if b == 0 {
        return Err(zero_division("integer division or modulo by zero"));
    }
    let q = a.checked_div(b).ok_or_else(overflow)?;
    Ok(if a % b != 0 && ((a < 0) != (b < 0)) { q - 1 } else { q })
}

pub fn int_mod(a: i64, b: i64) -> PyResult<i64> {
    if b == 0 {
        return Err(zero_division("integer division or modulo by zero"));
    }
    let r = a.checked_rem(b).unwrap_or(0);
    Ok(if r != 0 && ((r < 0) != (b < 0)) { r + b } else { r })
}

pub fn float_mod(a: f64, b: f64) -> PyResult<f64> {
    if b == 0.0 {
        return Err(zero_division("float modulo"));
    }
    let r = a % b;
    Ok(if r != 0.0 && ((r < 0.0) != (b < 0.0)) { r + b } else { r })
}

pub fn int_pow(base: i64, exp: i64) -> PyResult {
    if exp < 0 {
        if base == 0 {
            return Err(zero_division("0.0 cannot be raised to a negative power"));
        }
        return Ok(Value::Float((base as f64).powf(exp as f64)));
    }
    let exp = u32::try_from(exp).map_err(|_| overflow())?;
    base.checked_pow(exp).map(Value::Int).ok_or_else(overflow)
}

fn repeat_count(v: &Value) -> Option<i64> {
    match v {
        Value::Int(n) => Some(*n),
        Value::Bool(b) => Some(i64::from(*b)),
        _ => None,
    }
}

pub fn binop(interp: &mut Interp, a: &Value, op: BinOp, b: &Value) -> PyResult {
    // bool op bool stays bool for the bitwise operators
    if let (Value::Bool(x), Value::Bool(y)) = (a, b) {
        match op {
            BinOp::BitAnd => return Ok(Value::Bool(*x & *y)),
            BinOp::BitOr => return Ok(Value::Bool(*x | *y)),
            BinOp::BitXor => return Ok(Value::Bool(*x ^ *y)),
            _ => {}
        }
    }
    if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
        return int_binop(x, op, y);
    }
    if let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) {
        if !matches!(a, Value::Str(_)) {
            return float_binop(x, op, y);
        }
    }
    match (a, op, b) {
        (Value::Str(x), BinOp::Add, Value::Str(y)) => {
            let mut s = String::with_capacity(x.text.len() + y.text.len());
            s.push_str(&x.text);
            s.push_str(&y.text);
            Value::str(s)
        }
        (Value::Str(s), BinOp::Mul, n) | (n, BinOp::Mul, Value::Str(s)) if repeat_count(n).is_some() => {
            let n = repeat_count(n).unwrap_or(0).max(0) as usize;
            ensure_room(s.text.len().saturating_mul(n))?;
            Value::str(s.text.repeat(n))
        }
        (Value::Str(s), BinOp::Mod, args) => Value::str(percent_format(&s.text, args)?),
        (Value::List(x), BinOp::Add, Value::List(y)) => {
            let mut items = x.items.borrow().clone();
            items.extend(y.items.borrow().iter().cloned());
            Value::list(items)
        }
        (Value::Tuple(x), BinOp::Add, Value::Tuple(y)) => {
            let mut items = x.items.clone();
            items.extend(y.items.iter().cloned());
            Value::tuple(items)
        }
        (Value::List(l), BinOp::Mul, n) | (n, BinOp::Mul, Value::List(l)) if repeat_count(n).is_some() => {
            let n = repeat_count(n).unwrap_or(0).max(0) as usize;
            let items = l.items.borrow();
            ensure_room(items.len().saturating_mul(n).saturating_mul(std::mem::size_of::<Value>()))?;
            let mut out = Vec::with_capacity(items.len() * n);
            for _ in 0..n {
                out.extend(items.iter().cloned());
            }
            Value::list(out)
        }
        (Value::Tuple(t), BinOp::Mul, n) | (n, BinOp::Mul, Value::Tuple(t)) if repeat_count(n).is_some() => {
            let n = repeat_count(n).unwrap_or(0).max(0) as usize;
            ensure_room(t.items.len().saturating_mul(n).saturating_mul(std::mem::size_of::<Value>()))?;
            let mut out = Vec::with_capacity(t.items.len() * n);
            for _ in 0..n {
                out.extend(t.items.iter().cloned());
            }
            Value::tuple(out)
        }
        (Value::Set(x), BinOp::BitOr | BinOp::BitAnd | BinOp::Sub | BinOp::BitXor, Value::Set(y)) => {
            let (x, y) = (x.map.borrow(), y.map.borrow());
            let items: Vec<Value> = match op {
                BinOp::BitOr => x.values().chain(y.values()).cloned().collect(),
                BinOp::BitAnd => x.iter().filter(|(k, _)| y.contains_key(*k)).map(|(_, v)| v.clone()).collect(),
                BinOp::Sub => x.iter().filter(|(k, _)| !y.contains_key(*k)).map(|(_, v)| v.clone()).collect(),
                _ => x
                    .iter()
                    .filter(|(k, _)| !y.contains_key(*k))
                    .chain(y.iter().filter(|(k, _)| !x.contains_key(*k)))
                    .map(|(_, v)| v.clone())
                    .collect(),
            };
            Value::set(items)
        }
        (Value::Dict(x), BinOp::BitOr, Value::Dict(y)) => {
            let mut entries: Vec<(Value, Value)> = x.map.borrow().values().cloned().collect();
            entries.extend(y.map.borrow().values().cloned());
            Value::dict_of(x.kind, x.default_factory.clone(), entries)
        }
        (Value::Dict(x), BinOp::Add | BinOp::Sub, Value::Dict(y)) if x.kind == DictKind::Counter => {
            counter_arith(interp, x, op, y)
        }
        _ => Err(type_error(format!(
            "unsupported operand type(s) for {}: '{}' and '{}'",
            op_symbol(op),
            a.type_name(),
            b.type_name()
        ))),
    }
}

fn counter_arith(interp: &mut Interp, x: &Rc<DictObj>, op: BinOp, y: &Rc<DictObj>) -> PyResult {
    let mut entries: Vec<(Value, Value)> = x.map.borrow().values().cloned().collect();
    for (k, v) in y.map.borrow().values() {
        let hk = k.hash_key()?;
        match entries.iter_mut().find(|(ek, _)| ek.hash_key().ok().as_ref() == Some(&hk)) {
            Some((_, ev)) => *ev = binop(interp, ev, op, v)?,
            None if op == BinOp::Add => entries.push((k.clone(), v.clone())),
            None => entries.push((k.clone(), unary(UnaryOp::Neg, v)?)),
        }
    }
    entries.retain(|(_, v)| v.as_int().is_some_and(|n| n > 0));
    Value::dict_of(DictKind::Counter, None, entries)
}

fn op_symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::FloorDiv => "//",
        BinOp::Mod => "%",
        BinOp::Pow => "** or pow()",
        BinOp::BitAnd => "&",
        BinOp::BitOr => "|",
        BinOp::BitXor => "^",
        BinOp::LShift => "<<",
        BinOp::RShift => ">>",
        BinOp::MatMul => "@",
    }
}

fn int_binop(x: i64, op: BinOp, y: i64) -> PyResult {
    let checked = |r: Option<i64>| r.map(Value::Int).ok_or_else(overflow);
    match op {
        BinOp::Add => checked(x.checked_add(y)),
        BinOp::Sub => checked(x.checked_sub(y)),
        BinOp::Mul => checked(x.checked_mul(y)),
        BinOp::Div => {
            if y == 0 {
                Err(zero_division("division by zero"))
            } else {
                Ok(Value::Float(x as f64 / y as f64))
            }
        }
        BinOp::FloorDiv => int_floordiv(x, y).map(Value::Int),
        BinOp::Mod => int_mod(x, y).map(Value::Int),
        BinOp::Pow => int_pow(x, y),
        BinOp::BitAnd => Ok(Value::Int(x & y)),
        BinOp::BitOr => Ok(Value::Int(x | y)),
        BinOp::BitXor => Ok(Value::Int(x ^ y)),
        BinOp::LShift => {
            if y < 0 {
                return Err(value_error("negative shift count"));
            }
            if x == 0 {
                return Ok(Value::Int(0));
            }
            if y >= 63 {
                return Err(overflow());
            }
            let r = x << y;
            if r >> y != x {
                return Err(overflow());
            }
            Ok(Value::Int(r))
        }
        BinOp::RShift => {
            if y < 0 {
                return Err(value_error("negative shift count"));
            }
            Ok(Value::Int(if y >= 64 { if x < 0 { -1 } else { 0 } } else { x >> y }))
        }
        BinOp::MatMul => Err(type_error("unsupported operand type(s) for @: 'int' and 'int'")),
    }
}

fn float_binop(x: f64, op: BinOp, y: f64) -> PyResult {
    Ok(Value::Float(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => {
            if y == 0.0 {
                return Err(zero_division("float division by zero"));
            }
            x / y
        }
        BinOp::FloorDiv => {
            if y == 0.0 {
                return Err(zero_division("float floor division by zero"));
            }
            (x / y).floor()
        }
        BinOp::Mod => float_mod(x, y)?,
        BinOp::Pow => {
            if x == 0.0 && y < 0.0 {
                return Err(zero_division("0.0 cannot be raised to a negative power"));
            }
            if x < 0.0 && y.fract() != 0.0 {
                return Err(value_error("complex results are not supported"));
            }
            let r = x.powf(y);
            if r.is_infinite() && x.is_finite() && y.is_finite() {
                return Err(exc("OverflowError", "(34, 'Numerical result out of range')"));
            }
            r
        }
        _ => {
            return Err(type_error(format!(
                "unsupported operand type(s) for {}: 'float' and 'float'",
                op_symbol(op)
            )))
        }
    }))
}

pub fn unary(op: UnaryOp, v: &Value) -> PyResult {
    match (op, v) {
        (UnaryOp::Not, v) => Ok(Value::Bool(!v.truthy())),
        (UnaryOp::Neg, Value::Float(f)) => Ok(Value::Float(-f)),
        (UnaryOp::Pos, Value::Float(f)) => Ok(Value::Float(*f)),
        (UnaryOp::Neg, v) if v.as_int().is_some() => {
            v.as_int().unwrap_or(0).checked_neg().map(Value::Int).ok_or_else(overflow)
        }
        (UnaryOp::Pos, v) if v.as_int().is_some() => Ok(Value::Int(v.as_int().unwrap_or(0))),
        (UnaryOp::Invert, v) if v.as_int().is_some() => Ok(Value::Int(!v.as_int().unwrap_or(0))),
        (_, v) => Err(type_error(format!("bad operand type for unary operator: '{}'", v.type_name()))),
    }
}

pub fn compare(interp: &mut Interp, a: &Value, op: CmpOp, b: &Value) -> PyResult<bool> {
    let nan = |v: &Value| matches!(v, Value::Float(f) if f.is_nan());
    Ok(match op {
        CmpOp::Eq => a.py_eq(b),
        CmpOp::Ne => !a.py_eq(b),
        CmpOp::Is => a.is(b),
        CmpOp::IsNot => !a.is(b),
        CmpOp::In => contains(interp, b, a)?,
        CmpOp::NotIn => !contains(interp, b, a)?,
        CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge => {
            if nan(a) || nan(b) {
                return Ok(false);
            }
            if let (Value::Set(_), Value::Set(_)) = (a, b) {
                let ord = a.py_cmp(b);
                return Ok(matches!(
                    (op, ord),
                    (CmpOp::Lt, Ok(Ordering::Less))
                        | (CmpOp::Gt, Ok(Ordering::Greater))
                        | (CmpOp::Le, Ok(Ordering::Less | Ordering::Equal))
                        | (CmpOp::Ge, Ok(Ordering::Greater | Ordering::Equal))
                ));
            }
            let ord = a.py_cmp(b)?;
            match op {
                CmpOp::Lt => ord == Ordering::Less,
                CmpOp::Le => ord != Ordering::Greater,
                CmpOp::Gt => ord == Ordering::Greater,
                _ => ord != Ordering::Less,
            }
        }
    })
}

pub fn contains(interp: &mut Interp, container: &Value, item: &Value) -> PyResult<bool> {
    match container {
        Value::Str(s) => match item {
            Value::Str(sub) => Ok(s.text.contains(sub.text.as_str())),
            other => Err(type_error(format!("'in <string>' requires string as left operand, not {}", other.type_name()))),
        },
        Value::List(l) => Ok(l.items.borrow().iter().any(|v| v.py_eq(item))),
        Value::Tuple(t) => Ok(t.items.iter().any(|v| v.py_eq(item))),
        Value::Dict(d) => Ok(d.map.borrow().contains_key(&item.hash_key()?)),
        Value::Set(s) => Ok(s.contains(&item.hash_key()?)),
        Value::Range(start, stop, step) => Ok(match item.as_int() {
            Some(n) => {
                let in_bounds = if *step > 0 { *start <= n && n < *stop } else { *stop < n && n <= *start };
                in_bounds && (i128::from(n) - i128::from(*start)) % i128::from(*step) == 0
            }
            None => item.as_f64().is_some_and(|f| {
                f.fract() == 0.0 && {
                    let n = f as i64;
                    let in_bounds = if *step > 0 { *start <= n && n < *stop } else { *stop < n && n <= *start };
                    in_bounds && (i128::from(n) - i128::from(*start)) % i128::from(*step) == 0
                }
            }),
        }),
        Value::Iter(_) => {
            let mut source = interp.source(container)?;
            while let Some(v) = source.next(interp)? {
                if v.py_eq(item) {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        other => Err(type_error(format!("argument of type '{}' is not iterable", other.type_name()))),
    }
}

// ---- indexing ----

fn index_value(v: &Value) -> PyResult<i64> {
    v.as_int().ok_or_else(|| {
        type_error(format!("indices must be integers or slices, not {}", v.type_name()))
    })
}

fn normalize_index(index: i64, len: usize, what: &str) -> PyResult<usize> {
    let len = len as i64;
    let i = if index < 0 { index + len } else { index };
    if i < 0 || i >= len {
        return Err(exc("IndexError", format!("{what} index out of range")));
    }
    Ok(i as usize)
}

/// `slice.indices(len)`: start, stop and step after clamping.
pub fn slice_bounds(parts: &(Value, Value, Value), len: usize) -> PyResult<(i64, i64, i64)> {
    let len = len as i64;
    let step = match &parts.2 {
        Value::None => 1,
        v => index_value(v)?,
    };
    if step == 0 {
        return Err(value_error("slice step cannot be zero"));
    }
    let (lower, upper) = if step > 0 { (0, len) } else { (-1, len - 1) };
    let clamp = |v: &Value, default: i64| -> PyResult<i64> {
        Ok(match v {
            Value::None => default,
            v => {
                let i = index_value(v)?;
                if i < 0 {
                    (i + len).max(lower)
                } else {
                    i.min(upper)
                }
            }
        })
    };
    let start = clamp(&parts.0, if step > 0 { lower } else { upper })?;
    let stop = clamp(&parts.1, if step > 0 { upper } else { lower })?;
    Ok((start, stop, step))
}

pub fn slice_indices(parts: &(Value, Value, Value), len: usize) -> PyResult<Vec<usize>> {
    let (start, stop, step) = slice_bounds(parts, len)?;
    let mut out = Vec::new();
    let mut i = start;
    while (step > 0 && i < stop) || (step < 0 && i > stop) {
        out.push(i as usize);
        i += step;
    }
    Ok(out)
}

pub fn get_item(interp: &mut Interp, obj: &Value, index: &Value) -> PyResult {
    match (obj, index) {
        (Value::List(l), Value::Slice(parts)) => {
            let items = l.items.borrow();
            let picked = slice_indices(parts, items.len())?.into_iter().map(|i| items[i].clone()).collect();
            Value::list(picked)
        }
        (Value::List(l), i) => {
            let items = l.items.borrow();
            let i = normalize_index(index_value(i)?, items.len(), "list")?;
            Ok(items[i].clone())
        }
        (Value::Tuple(t), Value::Slice(parts)) => {
            let picked = slice_indices(parts, t.items.len())?.into_iter().map(|i| t.items[i].clone()).collect();
            Value::tuple(picked)
        }
        (Value::Tuple(t), i) => {
            let i = normalize_index(index_value(i)?, t.items.len(), "tuple")?;
            Ok(t.items[i].clone())
        }
        (Value::Str(s), Value::Slice(parts)) => {
            if s.text.is_ascii() {
                let bytes = s.text.as_bytes();
                let picked: Vec<u8> = slice_indices(parts, bytes.len())?.into_iter().map(|i| bytes[i]).collect();
                return Value::str(String::from_utf8(picked).unwrap_or_default());
            }
            let chars: Vec<char> = s.text.chars().collect();
            Value::str(slice_indices(parts, chars.len())?.into_iter().map(|i| chars[i]).collect::<String>())
        }
        (Value::Str(s), i) => {
            let i = index_value(i)?;
            if s.text.is_ascii() {
                let idx = normalize_index(i, s.text.len(), "string")?;
                return Value::str(&s.text[idx..idx + 1]);
            }
            let n = s.chars_len();
            let idx = normalize_index(i, n, "string")?;
            Value::str(s.text.chars().nth(idx).map(String::from).unwrap_or_default())
        }
        (Value::Dict(d), key) => {
            let hk = key.hash_key()?;
            if let Some(v) = d.get(&hk) {
                return Ok(v);
            }
            match d.kind {
                DictKind::Counter => Ok(Value::Int(0)),
                DictKind::Default if d.default_factory.is_some() => {
                    let factory = d.default_factory.clone().unwrap_or(Value::None);
                    let v = interp.call(&factory, Vec::new(), Vec::new())?;
                    d.insert(key.clone(), v.clone())?;
                    Ok(v)
                }
                _ => Err(Flow::Exc(Rc::new(ExcObj { kind: "KeyError".into(), args: vec![key.clone()] }))),
            }
        }
        (Value::Range(start, stop, step), Value::Slice(parts)) => {
            let n = range_len(*start, *stop, *step) as usize;
            let picked = slice_indices(parts, n)?
                .into_iter()
                .map(|i| Value::Int(start + step * i as i64))
                .collect();
            Value::list(picked)
        }
        (Value::Range(start, stop, step), i) => {
            let n = range_len(*start, *stop, *step) as usize;
            let i = normalize_index(index_value(i)?, n, "range object")?;
            Ok(Value::Int(start + step * i as i64))
        }
        (Value::Builtin(_), _) => Ok(obj.clone()), // typing generics such as List[int]
        (other, _) => Err(type_error(format!("'{}' object is not subscriptable", other.type_name()))),
    }
}

pub fn set_item(interp: &mut Interp, obj: &Value, index: Value, value: Value) -> PyResult<()> {
    match (obj, &index) {
        (Value::List(l), Value::Slice(parts)) => {
            let replacement = interp.collect(&value)?;
            let mut items = l.items.borrow_mut();
            let (start, stop, step) = slice_bounds(parts, items.len())?;
            if step == 1 {
                let start = start.max(0) as usize;
                let stop = (stop.max(start as i64) as usize).max(start);
                items.splice(start..stop, replacement);
            } else {
                let targets = slice_indices(parts, items.len())?;
                if targets.len() != replacement.len() {
                    return Err(value_error(format!(
                        "attempt to assign sequence of size {} to extended slice of size {}",
                        replacement.len(),
                        targets.len()
                    )));
                }
                for (i, v) in targets.into_iter().zip(replacement) {
                    items[i] = v;
                }
            }
            drop(items);
            l.sync()
        }
        (Value::List(l), i) => {
            let mut items = l.items.borrow_mut();
            let i = normalize_index(index_value(i)?, items.len(), "list assignment")?;
            items[i] = value;
            Ok(())
        }
        (Value::Dict(d), _) => d.insert(index, value),
        (other, _) => Err(type_error(format!(
            "'{}' object does not support item assignment",
            other.type_name()
        ))),
    }
}

pub fn del_item(obj: &Value, index: &Value) -> PyResult<()> {
    match (obj, index) {
        (Value::List(l), Value::Slice(parts)) => {
            let mut items = l.items.borrow_mut();
            let mut doomed = slice_indices(parts, items.len())?;
            doomed.sort_unstable();
            for i in doomed.into_iter().rev() {
                items.remove(i);
            }
            drop(items);
            l.sync()
        }
        (Value::List(l), i) => {
            let mut items = l.items.borrow_mut();
            let i = normalize_index(index_value(i)?, items.len(), "list assignment")?;
            items.remove(i);
            drop(items);
            l.sync()
        }
        (Value::Dict(d), key) => {
            let removed = d.map.borrow_mut().shift_remove(&key.hash_key()?);
            if removed.is_none() {
                return Err(Flow::Exc(Rc::new(ExcObj { kind: "KeyError".into(), args: vec![key.clone()] })));
            }
            d.sync()
        }
        (other, _) => Err(type_error(format!("'{}' object doesn't support item deletion", other.type_name()))),
    }
}

// ---- formatting ----

#[derive(Debug, Default)]
struct Spec {
    fill: Option<char>,
    align: Option<char>,
    sign: Option<char>,
    alternate: bool,
    zero: bool,
    width: usize,
    grouping: Option<char>,
    precision: Option<usize>,
    kind: Option<char>,
}

fn parse_spec(spec: &str) -> PyResult<Spec> {
    let chars: Vec<char> = spec.chars().collect();
    let mut out = Spec::default();
    let mut i = 0;
    let is_align = |c: char| matches!(c, '<' | '>' | '^' | '=');
    if chars.len() >= 2 && is_align(chars[1]) {
        out.fill = Some(chars[0]);
        out.align = Some(chars[1]);
        i = 2;
    } else if !chars.is_empty() && is_align(chars[0]) {
        out.align = Some(chars[0]);
        i = 1;
    }
    if let Some(&c) = chars.get(i) {
        if matches!(c, '+' | '-' | ' ') {
            out.sign = Some(c);
            i += 1;
        }
    }
    if chars.get(i) == Some(&'#') {
        out.alternate = true;
        i += 1;
    }
    if chars.get(i) == Some(&'0') {
        out.zero = true;
        i += 1;
    }
    let start = i;
    while chars.get(i).is_some_and(char::is_ascii_digit) {
        i += 1;
    }
    if i > start {
        out.width = chars[start..i].iter().collect::<String>().parse().map_err(|_| value_error("width too big"))?;
    }
    if let Some(&c) = chars.get(i) {
        if c == ',' || c == '_' {
            out.grouping = Some(c);
            i += 1;
        }
    }
    if chars.get(i) == Some(&'.') {
        i += 1;
        let start = i;
        while chars.get(i).is_some_and(char::is_ascii_digit) {
            i += 1;
        }
        if i == start {
            return Err(value_error("Format specifier missing precision"));
        }
        out.precision = Some(chars[start..i].iter().collect::<String>().parse().map_err(|_| value_error("precision too big"))?);
    }
    if let Some(&c) = chars.get(i) {
        out.kind = Some(c);
        i += 1;
    }
    if i != chars.len() {
        return Err(value_error(format!("Invalid format specifier '{spec}'")));
    }
    Ok(out)
}

fn group_digits(digits: &str, sep: char) -> String {
    let (int_part, rest) = match digits.find(|c: char| !c.is_ascii_digit()) {
        Some(i) => digits.split_at(i),
        None => (digits, ""),
    };
    let mut out = String::new();
    for (i, c) in int_part.chars().enumerate() {
        if i > 0 && (int_part.len() - i) % 3 == 0 {
            out.push(sep);
        }
        out.push(c);
    }
    out.push_str(rest);
    out
}

/// Python's `%e` mantissa/exponent layout: `1.50e+03`.
fn sci(v: f64, precision: usize, upper: bool) -> String {
    let s = format!("{:.*e}", precision, v);
    let (mantissa, exponent) = s.split_once('e').unwrap_or((&s, "0"));
    let exponent: i32 = exponent.parse().unwrap_or(0);
    let e = if upper { 'E' } else { 'e' };
    format!("{mantissa}{e}{}{:02}", if exponent < 0 { '-' } else { '+' }, exponent.abs())
}

fn general(v: f64, precision: usize, alternate: bool, upper: bool) -> String {
    let p = precision.max(1);
    if v == 0.0 {
        return if alternate { format!("{:.*}", p - 1, v) } else if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let probe = format!("{:.*e}", p - 1, v);
    let exponent: i32 = probe.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    let mut s = if -4 <= exponent && exponent < p as i32 {
        format!("{:.*}", (p as i32 - 1 - exponent).max(0) as usize, v)
    } else {
        sci(v, p - 1, upper)
    };
    if !alternate {
        let (body, tail) = match s.find(['e', 'E']) {
            Some(i) => (s[..i].to_string(), s[i..].to_string()),
            None => (s.clone(), String::new()),
        };
        let body = if body.contains('.') { body.trim_end_matches('0').trim_end_matches('.').to_string() } else { body };
        s = body + &tail;
    }
    s
}

fn float_special(v: f64, upper: bool) -> Option<String> {
    let s = if v.is_nan() {
        "nan"
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf"
        } else {
            "-inf"
        }
    } else {
        return None;
    };
    Some(if upper { s.to_uppercase() } else { s.to_string() })
}

pub fn format_value(value: &Value, spec: &str) -> PyResult<String> {
    if spec.is_empty() {
        return Ok(value.to_str());
    }
    let spec = parse_spec(spec)?;
    let numeric = matches!(value, Value::Int(_) | Value::Bool(_) | Value::Float(_));
    let body = match (spec.kind, value) {
        (Some('s') | None, Value::Str(s)) => {
            let text = match spec.precision {
                Some(p) => s.text.chars().take(p).collect(),
                None => s.text.clone(),
            };
            return Ok(pad(&text, &spec, '<', false));
        }
        (Some('c'), v) if v.as_int().is_some() => {
            let c = char::from_u32(v.as_int().unwrap_or(0) as u32).ok_or_else(|| exc("OverflowError", "%c arg not in range"))?;
            c.to_string()
        }
        (Some(k @ ('d' | 'n' | 'x' | 'X' | 'o' | 'b')), v) if v.as_int().is_some() && !matches!(v, Value::Float(_)) => {
            let n = v.as_int().unwrap_or(0);
            let magnitude = n.unsigned_abs();
            let digits = match k {
                'x' => format!("{magnitude:x}"),
                'X' => format!("{magnitude:X}"),
                'o' => format!("{magnitude:o}"),
                'b' => format!("{magnitude:b}"),
                _ => magnitude.to_string(),
            };
            let prefix = match (spec.alternate, k) {
                (true, 'x') => "0x",
                (true, 'X') => "0X",
                (true, 'o') => "0o",
                (true, 'b') => "0b",
                _ => "",
            };
            let digits = match spec.grouping {
                Some(sep) => group_digits(&digits, sep),
                None => digits,
            };
            let sign = sign_prefix(n < 0, spec.sign);
            return Ok(pad_number(sign, &format!("{prefix}{digits}"), &spec));
        }
        (None, v) if v.as_int().is_some() && !matches!(v, Value::Float(_)) && !matches!(v, Value::Bool(_)) => {
            let n = v.as_int().unwrap_or(0);
            let digits = n.unsigned_abs().to_string();
            let digits = match spec.grouping {
                Some(sep) => group_digits(&digits, sep),
                None => digits,
            };
            return Ok(pad_number(sign_prefix(n < 0, spec.sign), &digits, &spec));
        }
        (k @ (Some('f' | 'F' | 'e' | 'E' | 'g' | 'G' | '%') | None), v) if v.as_f64().is_some() => {
            let f = v.as_f64().unwrap_or(0.0);
            let upper = matches!(k, Some('F' | 'E' | 'G'));
            let negative = f.is_sign_negative();
            let magnitude = f.abs();
            let digits = if let Some(special) = float_special(magnitude, upper) {
                special
            } else {
                match k {
                    Some('f' | 'F') => format!("{:.*}", spec.precision.unwrap_or(6), magnitude),
                    Some('e' | 'E') => sci(magnitude, spec.precision.unwrap_or(6), upper),
                    Some('g' | 'G') => general(magnitude, spec.precision.unwrap_or(6), spec.alternate, upper),
                    Some('%') => format!("{:.*}%", spec.precision.unwrap_or(6), magnitude * 100.0),
                    _ => match spec.precision {
                        Some(p) => {
                            let s = general(magnitude, p, spec.alternate, false);
                            if s.contains(['.', 'e', 'n', 'i']) {
                                s
                            } else {
                                s + ".0"
                            }
                        }
                        None => render_float(magnitude),
                    },
                }
            };
            let digits = match spec.grouping {
                Some(sep) => group_digits(&digits, sep),
                None => digits,
            };
            let negative = negative && !f.is_nan();
            return Ok(pad_number(sign_prefix(negative, spec.sign), &digits, &spec));
        }
        (Some(k), v) => {
            return Err(value_error(format!(
                "Unknown format code '{k}' for object of type '{}'",
                v.type_name()
            )))
        }
        (None, v) => v.to_str(),
    };
    Ok(pad(&body, &spec, if numeric { '>' } else { '<' }, false))
}

fn sign_prefix(negative: bool, sign: Option<char>) -> &'static str {
    match (negative, sign) {
        (true, _) => "-",
        (false, Some('+')) => "+",
        (false, Some(' ')) => " ",
        _ => "",
    }
}

fn pad_number(sign: &str, digits: &str, spec: &Spec) -> String {
    let (fill, align) = if spec.zero && spec.align.is_none() {
        (Some(spec.fill.unwrap_or('0')), Some('='))
    } else {
        (spec.fill, spec.align)
    };
    let len = sign.chars().count() + digits.chars().count();
    let fill = fill.unwrap_or(' ');
    if len >= spec.width {
        return format!("{sign}{digits}");
    }
    let gap = spec.width - len;
    let filler = |n: usize| fill.to_string().repeat(n);
    match align.unwrap_or('>') {
        '=' => format!("{sign}{}{digits}", filler(gap)),
        '<' => format!("{sign}{digits}{}", filler(gap)),
        '^' => format!("{}{sign}{digits}{}", filler(gap / 2), filler(gap - gap / 2)),
        _ => format!("{}{sign}{digits}", filler(gap)),
    }
}

fn pad(text: &str, spec: &Spec, default_align: char, _numeric: bool) -> String {
    let len = text.chars().count();
    if len >= spec.width {
        return text.to_string();
    }
    let gap = spec.width - len;
    let fill = spec.fill.unwrap_or(if spec.zero { '0' } else { ' ' });
    let filler = |n: usize| fill.to_string().repeat(n);
    match spec.align.unwrap_or(default_align) {
        '<' => format!("{text}{}", filler(gap)),
        '^' => format!("{}{text}{}", filler(gap / 2), filler(gap - gap / 2)),
        _ => format!("{}{text}", filler(gap)),
    }
}

/// `str % args` with the common conversions.
pub fn percent_format(template: &str, args: &Value) -> PyResult<String> {
    let values: Vec<Value> = match args {
        Value::Tuple(t) => t.items.clone(),
        other => vec![other.clone()],
    };
    let mut next = values.into_iter();
    let mut out = String::new();
    let mut chars = template.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        let mut flags = String::new();
        while let Some(&f) = chars.peek() {
            if matches!(f, '-' | '+' | ' ' | '0' | '#') {
                flags.push(f);
                chars.next();
            } else {
                break;
            }
        }
        let mut width = String::new();
        while let Some(&d) = chars.peek().filter(|c| c.is_ascii_digit()) {
            width.push(d);
            chars.next();
        }
        let mut precision = String::new();
        if chars.peek() == Some(&'.') {
            chars.next();
            precision.push('.');
            while let Some(&d) = chars.peek().filter(|c| c.is_ascii_digit()) {
                precision.push(d);
                chars.next();
            }
            if precision == "." {
                precision.push('0');
            }
        }
        let Some(kind) = chars.next() else {
            return Err(value_error("incomplete format"));
        };
        if kind == '%' {
            out.push('%');
            continue;
        }
        let value = next.next().ok_or_else(|| type_error("not enough arguments for format string"))?;
        let align = if flags.contains('-') { "<" } else { "" };
        let sign = if flags.contains('+') {
            "+"
        } else if flags.contains(' ') {
            " "
        } else {
            ""
        };
        let zero = if flags.contains('0') && align.is_empty() { "0" } else { "" };
        let alt = if flags.contains('#') { "#" } else { "" };
        let piece = match kind {
            's' => format_value(&Value::str(value.to_str())?, &format!("{align}{width}{precision}"))?,
            'r' => format_value(&Value::str(value.repr())?, &format!("{align}{width}{precision}"))?,
            'd' | 'i' | 'u' => {
                let n = match &value {
                    Value::Float(f) => Value::Int(f.trunc() as i64),
                    v if v.as_int().is_some() => Value::Int(v.as_int().unwrap_or(0)),
                    v => return Err(type_error(format!("%d format: a number is required, not {}", v.type_name()))),
                };
                format_value(&n, &format!("{align}{sign}{zero}{width}d"))?
            }
            'f' | 'F' | 'e' | 'E' | 'g' | 'G' | 'x' | 'X' | 'o' | 'c' => {
                let spec = format!("{align}{sign}{alt}{zero}{width}{precision}{kind}");
                let value = if matches!(kind, 'f' | 'F' | 'e' | 'E' | 'g' | 'G') {
                    Value::Float(value.as_f64().ok_or_else(|| type_error("must be real number"))?)
                } else {
                    value
                };
                format_value(&value, &spec)?
            }
            other => return Err(value_error(format!("unsupported format character '{other}'"))),
        };
        out.push_str(&piece);
    }
    if next.next().is_some() {
        return Err(type_error("not all arguments converted during string formatting"));
    }
    Ok(out)
}
