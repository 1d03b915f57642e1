//! Builtin functions, the supported standard-library modules and attribute
//! lookup.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::VecDeque;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

use super::interp::{check_growth, Interp};
pub use super::methods::call_method;
use super::methods::has_method;
pub use super::ops::{binop, compare, del_item, format_value, get_item, set_item, unary};
use super::ops::{ensure_room, float_mod, int_floordiv, int_mod, overflow};
use super::value::*;

/// Upper bound for `sys.setrecursionlimit`, sized to the interpreter stack.
pub const MAX_RECURSION_LIMIT: usize = 3000;

const TYPE_NAMES: &[&str] =
    &["int", "float", "str", "bool", "list", "tuple", "dict", "set", "frozenset", "range", "object", "type", "slice"];

const FUNCTIONS: &[&str] = &[
    "print", "len", "range", "abs", "min", "max", "sum", "sorted", "reversed", "enumerate", "zip", "map", "filter",
    "any", "all", "isinstance", "round", "divmod", "pow", "chr", "ord", "hex", "bin", "oct", "iter", "next", "hash",
    "repr", "callable", "id", "input", "open", "format", "issubclass", "getattr", "hasattr",
];

pub fn is_type_name(name: &str) -> bool {
    TYPE_NAMES.contains(&name)
        || matches!(name, "collections.defaultdict" | "collections.Counter" | "collections.deque" | "collections.OrderedDict")
}

pub fn lookup_builtin(name: &str) -> Option<Value> {
    if TYPE_NAMES.contains(&name) || FUNCTIONS.contains(&name) || is_exception_type(name) {
        return Some(Value::builtin(name));
    }
    match name {
        "NotImplemented" => Some(Value::builtin("NotImplemented")),
        "Ellipsis" => Some(Value::Ellipsis),
        _ => None,
    }
}

const MODULES: &[&str] =
    &["math", "functools", "itertools", "collections", "heapq", "bisect", "string", "sys", "typing", "operator", "copy"];

pub fn import_module(name: &str) -> PyResult {
    if MODULES.contains(&name) || name == "collections.abc" {
        Ok(Value::Module(name.into()))
    } else {
        Err(exc("ModuleNotFoundError", format!("No module named '{name}'")))
    }
}

fn module_members(module: &str) -> &'static [&'static str] {
    match module {
        "math" => &[
            "pi", "e", "tau", "inf", "nan", "sqrt", "isqrt", "floor", "ceil", "trunc", "gcd", "lcm", "factorial",
            "comb", "perm", "pow", "exp", "log", "log2", "log10", "fabs", "sin", "cos", "tan", "asin", "acos", "atan",
            "atan2", "hypot", "degrees", "radians", "isclose", "isinf", "isnan", "isfinite", "prod", "fsum", "copysign",
            "fmod", "dist",
        ],
        "functools" => &["reduce", "lru_cache", "cache", "partial", "cmp_to_key"],
        "itertools" => &[
            "permutations", "combinations", "combinations_with_replacement", "product", "accumulate", "chain",
            "islice", "groupby", "zip_longest", "repeat", "count", "pairwise", "starmap",
        ],
        "collections" => &["defaultdict", "Counter", "deque", "OrderedDict"],
        "heapq" => &["heappush", "heappop", "heapify", "heappushpop", "heapreplace", "nlargest", "nsmallest"],
        "bisect" => &["bisect_left", "bisect_right", "bisect", "insort", "insort_left", "insort_right"],
        "string" => &["ascii_lowercase", "ascii_uppercase", "ascii_letters", "digits", "hexdigits", "octdigits", "punctuation", "whitespace"],
        "sys" => &["maxsize", "setrecursionlimit", "getrecursionlimit"],
        "typing" => &[
            "List", "Dict", "Tuple", "Set", "FrozenSet", "Optional", "Any", "Union", "Callable", "Iterable", "Iterator",
            "Sequence", "Mapping", "Deque", "DefaultDict", "Generator",
        ],
        "collections.abc" => &["Iterable", "Iterator", "Sequence", "Mapping", "Callable"],
        "operator" => &["add", "sub", "mul", "truediv", "floordiv", "mod", "neg", "itemgetter"],
        "copy" => &["copy", "deepcopy"],
        _ => &[],
    }
}

pub fn module_exports(module: &str) -> Vec<(&'static str, Value)> {
    module_members(module).iter().filter_map(|name| Some((*name, module_attr(module, name)?))).collect()
}

fn module_attr(module: &str, name: &str) -> Option<Value> {
    if !module_members(module).contains(&name) {
        return None;
    }
    let constant = match (module, name) {
        ("math", "pi") => Value::Float(std::f64::consts::PI),
        ("math", "e") => Value::Float(std::f64::consts::E),
        ("math", "tau") => Value::Float(std::f64::consts::TAU),
        ("math", "inf") => Value::Float(f64::INFINITY),
        ("math", "nan") => Value::Float(f64::NAN),
        ("sys", "maxsize") => Value::Int(i64::MAX),
        ("string", s) => Value::str_unchecked(match s {
            "ascii_lowercase" => "abcdefghijklmnopqrstuvwxyz",
            "ascii_uppercase" => "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
            "ascii_letters" => "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ",
            "digits" => "0123456789",
            "hexdigits" => "0123456789abcdefABCDEF",
            "octdigits" => "01234567",
            "punctuation" => "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~",
            _ => " \t\n\r\x0b\x0c",
        }),
        _ => return Some(Value::builtin(&format!("{module}.{name}"))),
    };
    Some(constant)
}

pub fn get_attr(_interp: &mut Interp, obj: &Value, name: &str) -> PyResult {
    let missing = || exc("AttributeError", format!("'{}' object has no attribute '{name}'", obj.type_name()));
    match obj {
        Value::Module(module) => module_attr(module, name)
            .ok_or_else(|| exc("AttributeError", format!("module '{module}' has no attribute '{name}'"))),
        Value::Builtin(builtin) => match (&**builtin, name) {
            (_, "__name__") => Value::str(builtin.rsplit('.').next().unwrap_or(builtin).to_string()),
            ("dict", "fromkeys") => Ok(Value::builtin("dict.fromkeys")),
            ("int", "from_bytes") => Err(missing()),
            ("itertools.chain", "from_iterable") => Ok(Value::builtin("itertools.chain.from_iterable")),
            ("str", method) if has_method("str", method) => Ok(Value::builtin(&format!("str.{method}"))),
            _ => Err(missing()),
        },
        Value::Exception(e) if name == "args" => Value::tuple(e.args.clone()),
        Value::Func(f) if name == "__name__" => Value::str(f.def.name.clone()),
        Value::Cached(c) => match name {
            "cache_clear" => Ok(Value::Method(Rc::new(MethodObj { receiver: obj.clone(), name: name.into() }))),
            "__wrapped__" => Ok(c.func.clone()),
            _ => Err(missing()),
        },
        Value::Int(v) if name == "real" || name == "numerator" => Ok(Value::Int(*v)),
        Value::Int(_) if name == "imag" => Ok(Value::Int(0)),
        Value::Int(_) if name == "denominator" => Ok(Value::Int(1)),
        Value::Float(v) if name == "real" => Ok(Value::Float(*v)),
        Value::Float(_) if name == "imag" => Ok(Value::Float(0.0)),
        _ => {
            if has_method(method_type(obj), name) {
                Ok(Value::Method(Rc::new(MethodObj { receiver: obj.clone(), name: name.into() })))
            } else {
                Err(missing())
            }
        }
    }
}

pub fn method_type(obj: &Value) -> &'static str {
    match obj {
        Value::Str(_) => "str",
        Value::List(_) => "list",
        Value::Tuple(_) => "tuple",
        Value::Dict(_) => "dict",
        Value::Set(_) => "set",
        Value::Int(_) | Value::Bool(_) => "int",
        Value::Float(_) => "float",
        _ => "",
    }
}

// ---- argument helpers ----

pub struct Args {
    pub name: String,
    pub positional: Vec<Value>,
    pub keywords: Vec<(String, Value)>,
}

impl Args {
    pub fn new(name: &str, positional: Vec<Value>, keywords: Vec<(String, Value)>) -> Self {
        Self { name: name.to_string(), positional, keywords }
    }

    pub fn arity(&self, min: usize, max: usize) -> PyResult<()> {
        let n = self.positional.len();
        if n < min || n > max {
            let expected = if min == max { format!("{min}") } else { format!("{min} to {max}") };
            return Err(type_error(format!("{}() takes {expected} arguments ({n} given)", self.name)));
        }
        Ok(())
    }

    pub fn kw(&mut self, name: &str) -> Option<Value> {
        let i = self.keywords.iter().position(|(k, _)| k == name)?;
        Some(self.keywords.remove(i).1)
    }

    /// Positional argument `i`, or the keyword of the same meaning.
    pub fn arg(&mut self, i: usize, keyword: &str) -> Option<Value> {
        if let Some(v) = self.kw(keyword) {
            return Some(v);
        }
        self.positional.get(i).cloned()
    }

    pub fn finish(&self) -> PyResult<()> {
        match self.keywords.first() {
            Some((k, _)) => Err(type_error(format!("{}() got an unexpected keyword argument '{k}'", self.name))),
            None => Ok(()),
        }
    }

    pub fn int(&self, i: usize) -> PyResult<i64> {
        expect_int(&self.positional[i], &self.name)
    }

    pub fn float(&self, i: usize) -> PyResult<f64> {
        expect_float(&self.positional[i], &self.name)
    }
}

pub fn expect_int(v: &Value, func: &str) -> PyResult<i64> {
    v.as_int().ok_or_else(|| {
        type_error(format!("{func}(): '{}' object cannot be interpreted as an integer", v.type_name()))
    })
}

pub fn expect_float(v: &Value, func: &str) -> PyResult<f64> {
    v.as_f64().ok_or_else(|| type_error(format!("{func}(): must be real number, not {}", v.type_name())))
}

fn int_of_float(f: f64) -> PyResult<i64> {
    if f.is_nan() {
        return Err(value_error("cannot convert float NaN to integer"));
    }
    if f.is_infinite() {
        return Err(exc("OverflowError", "cannot convert float infinity to integer"));
    }
    if !(-9.223_372_036_854_776e18..9.223_372_036_854_776e18).contains(&f) {
        return Err(overflow());
    }
    Ok(f as i64)
}

// ---- sorting ----

/// Stable merge sort with a fallible strict-less comparator.
pub fn merge_sort<T: Clone>(items: Vec<T>, less: &mut dyn FnMut(&T, &T) -> PyResult<bool>) -> PyResult<Vec<T>> {
    if items.len() <= 1 {
        return Ok(items);
    }
    let mut items = items;
    let right = items.split_off(items.len() / 2);
    let left = merge_sort(items, less)?;
    let right = merge_sort(right, less)?;
    let mut out = Vec::with_capacity(left.len() + right.len());
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if less(&right[j], &left[i])? {
            out.push(right[j].clone());
            j += 1;
        } else {
            out.push(left[i].clone());
            i += 1;
        }
    }
    out.extend_from_slice(&left[i..]);
    out.extend_from_slice(&right[j..]);
    Ok(out)
}

pub fn sort_values(interp: &mut Interp, items: Vec<Value>, key: Option<Value>, reverse: bool) -> PyResult<Vec<Value>> {
    // functools.cmp_to_key(cmp) sorts with the comparator directly
    if let Some(Value::Partial(p)) = &key {
        if matches!(&p.func, Value::Builtin(n) if &**n == "functools.cmp_to_key") {
            let cmp = p.args[0].clone();
            return merge_sort(items, &mut |a, b| {
                let (a, b) = if reverse { (b, a) } else { (a, b) };
                let r = interp.call(&cmp, vec![a.clone(), b.clone()], Vec::new())?;
                Ok(r.as_f64().ok_or_else(|| type_error("comparison function must return a number"))? < 0.0)
            });
        }
    }
    let keyed: Vec<(Value, Value)> = match &key {
        Some(k) if !matches!(k, Value::None) => items
            .into_iter()
            .map(|v| Ok((interp.call(k, vec![v.clone()], Vec::new())?, v)))
            .collect::<PyResult<_>>()?,
        _ => items.into_iter().map(|v| (v.clone(), v)).collect(),
    };
    let sorted = merge_sort(keyed, &mut |a, b| {
        let (a, b) = if reverse { (&b.0, &a.0) } else { (&a.0, &b.0) };
        Ok(a.py_cmp(b)? == Ordering::Less)
    })?;
    Ok(sorted.into_iter().map(|(_, v)| v).collect())
}

fn extreme(interp: &mut Interp, mut args: Args, want: Ordering) -> PyResult {
    let key = args.kw("key").filter(|k| !matches!(k, Value::None));
    let default = args.kw("default");
    args.finish()?;
    let items = if args.positional.len() == 1 {
        interp.collect(&args.positional[0])?
    } else {
        std::mem::take(&mut args.positional)
    };
    if items.is_empty() {
        return default.ok_or_else(|| value_error(format!("{}() arg is an empty sequence", args.name)));
    }
    let mut best: Option<(Value, Value)> = None;
    for item in items {
        let k = match &key {
            Some(f) => interp.call(f, vec![item.clone()], Vec::new())?,
            None => item.clone(),
        };
        let replace = match &best {
            None => true,
            Some((bk, _)) => k.py_cmp(bk)? == want,
        };
        if replace {
            best = Some((k, item));
        }
    }
    Ok(best.map(|(_, v)| v).unwrap_or(Value::None))
}

// ---- numeric helpers ----

fn parse_int(text: &str, base: i64) -> PyResult<i64> {
    let invalid = || value_error(format!("invalid literal for int() with base {base}: {}", Value::str_unchecked(text).repr()));
    let trimmed = text.trim();
    let (negative, body) = match trimmed.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, trimmed.strip_prefix('+').unwrap_or(trimmed)),
    };
    let lower = body.to_ascii_lowercase();
    let (base, digits) = match base {
        0 => {
            if let Some(d) = lower.strip_prefix("0x") {
                (16, d.to_string())
            } else if let Some(d) = lower.strip_prefix("0o") {
                (8, d.to_string())
            } else if let Some(d) = lower.strip_prefix("0b") {
                (2, d.to_string())
            } else {
                (10, lower.clone())
            }
        }
        16 => (16, lower.strip_prefix("0x").unwrap_or(&lower).to_string()),
        8 => (8, lower.strip_prefix("0o").unwrap_or(&lower).to_string()),
        2 => (2, lower.strip_prefix("0b").unwrap_or(&lower).to_string()),
        b if (2..=36).contains(&b) => (b, lower.clone()),
        _ => return Err(value_error("int() base must be >= 2 and <= 36, or 0")),
    };
    if digits.is_empty() || digits.starts_with('_') || digits.ends_with('_') || digits.contains("__") {
        return Err(invalid());
    }
    let digits: String = digits.chars().filter(|&c| c != '_').collect();
    let magnitude = u64::from_str_radix(&digits, base as u32).map_err(|e| {
        if matches!(e.kind(), std::num::IntErrorKind::PosOverflow) {
            overflow()
        } else {
            invalid()
        }
    })?;
    if negative {
        if magnitude == 1 << 63 {
            return Ok(i64::MIN);
        }
        i64::try_from(magnitude).map(|v| -v).map_err(|_| overflow())
    } else {
        i64::try_from(magnitude).map_err(|_| overflow())
    }
}

fn parse_float(text: &str) -> PyResult<f64> {
    let cleaned = text.trim().replace('_', "");
    let lower = cleaned.to_ascii_lowercase();
    let ok_word = matches!(
        lower.trim_start_matches(['+', '-']),
        "inf" | "infinity" | "nan"
    );
    let looks_numeric = lower.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | '+' | '-'));
    if !(ok_word || looks_numeric) {
        return Err(value_error(format!("could not convert string to float: {}", Value::str_unchecked(text).repr())));
    }
    cleaned
        .parse::<f64>()
        .map_err(|_| value_error(format!("could not convert string to float: {}", Value::str_unchecked(text).repr())))
}

fn round_half_even(v: f64) -> f64 {
    let r = v.round();
    if (v - v.trunc()).abs() == 0.5 {
        2.0 * (v / 2.0).round()
    } else {
        r
    }
}

fn py_round(args: &mut Args) -> PyResult {
    args.arity(1, 2)?;
    let ndigits = args.arg(1, "ndigits").filter(|v| !matches!(v, Value::None));
    let x = args.positional[0].clone();
    match (&x, ndigits) {
        (Value::Float(f), None) => Ok(Value::Int(int_of_float(round_half_even(*f))?)),
        (Value::Float(f), Some(n)) => {
            let n = expect_int(&n, "round")?;
            if !f.is_finite() {
                return Ok(Value::Float(*f));
            }
            if n >= 0 {
                let text = format!("{:.*}", n.min(300) as usize, f);
                Ok(Value::Float(text.parse().unwrap_or(*f)))
            } else {
                let scale = 10f64.powi((-n).min(308) as i32);
                Ok(Value::Float(round_half_even(f / scale) * scale))
            }
        }
        (v, n) if v.as_int().is_some() => {
            let i = v.as_int().unwrap_or(0);
            match n {
                None => Ok(Value::Int(i)),
                Some(n) => {
                    let n = expect_int(&n, "round")?;
                    if n >= 0 {
                        return Ok(Value::Int(i));
                    }
                    let scale = 10i64.checked_pow((-n) as u32).ok_or_else(overflow)?;
                    let q = int_floordiv(i, scale)?;
                    let r = int_mod(i, scale)?;
                    let twice = r * 2;
                    let q = if twice > scale || (twice == scale && q % 2 != 0) { q + 1 } else { q };
                    q.checked_mul(scale).map(Value::Int).ok_or_else(overflow)
                }
            }
        }
        (v, _) => Err(type_error(format!("type {} doesn't define __round__ method", v.type_name()))),
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

fn checked_product(values: impl IntoIterator<Item = i64>) -> PyResult<i64> {
    values.into_iter().try_fold(1i64, |acc, v| acc.checked_mul(v).ok_or_else(overflow))
}

fn comb(n: i64, k: i64) -> PyResult<i64> {
    if n < 0 || k < 0 {
        return Err(value_error("n and k must be non-negative integers"));
    }
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut result: i128 = 1;
    for i in 0..k {
        result = result * i128::from(n - i) / i128::from(i + 1);
        if result > i128::from(i64::MAX) {
            return Err(overflow());
        }
    }
    Ok(result as i64)
}

fn hash_value(v: &Value) -> PyResult<i64> {
    let key = v.hash_key()?;
    if let HashKey::Int(n) = key {
        return Ok(if n == -1 { -2 } else { n });
    }
    let mut hasher = DefaultHasher::new();
    key.hash(&mut hasher);
    Ok(hasher.finish() as i64)
}

fn isinstance_of(v: &Value, class: &Value) -> PyResult<bool> {
    match class {
        Value::Tuple(t) => {
            for c in &t.items {
                if isinstance_of(v, c)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Value::Builtin(name) => Ok(match &**name {
            "int" => matches!(v, Value::Int(_) | Value::Bool(_)),
            "bool" => matches!(v, Value::Bool(_)),
            "float" => matches!(v, Value::Float(_)),
            "str" => matches!(v, Value::Str(_)),
            "list" | "collections.deque" => matches!(v, Value::List(_)),
            "tuple" => matches!(v, Value::Tuple(_)),
            "dict" | "collections.OrderedDict" => matches!(v, Value::Dict(_)),
            "collections.defaultdict" => matches!(v, Value::Dict(d) if d.kind == DictKind::Default),
            "collections.Counter" => matches!(v, Value::Dict(d) if d.kind == DictKind::Counter),
            "set" | "frozenset" => matches!(v, Value::Set(_)),
            "range" => matches!(v, Value::Range(..)),
            "object" => true,
            n if is_exception_type(n) => matches!(v, Value::Exception(e) if exception_matches(&e.kind, n)),
            n if n.starts_with("typing.") || n.starts_with("collections.abc.") => {
                let bare = n.rsplit('.').next().unwrap_or(n);
                match bare {
                    "List" | "Sequence" => matches!(v, Value::List(_) | Value::Tuple(_) | Value::Str(_)),
                    "Dict" | "Mapping" => matches!(v, Value::Dict(_)),
                    "Tuple" => matches!(v, Value::Tuple(_)),
                    "Set" | "FrozenSet" => matches!(v, Value::Set(_)),
                    "Iterable" => matches!(
                        v,
                        Value::List(_) | Value::Tuple(_) | Value::Str(_) | Value::Dict(_) | Value::Set(_) | Value::Range(..) | Value::Iter(_)
                    ),
                    "Callable" => is_callable(v),
                    _ => return Err(type_error(format!("{n} cannot be used with isinstance()"))),
                }
            }
            _ => return Err(type_error("isinstance() arg 2 must be a type or tuple of types")),
        }),
        _ => Err(type_error("isinstance() arg 2 must be a type or tuple of types")),
    }
}

fn is_callable(v: &Value) -> bool {
    matches!(v, Value::Func(_) | Value::Builtin(_) | Value::Method(_) | Value::Cached(_) | Value::Partial(_))
}

fn type_of(v: &Value) -> Value {
    match v {
        Value::Dict(d) => Value::builtin(match d.kind {
            DictKind::Plain => "dict",
            DictKind::Default => "collections.defaultdict",
            DictKind::Counter => "collections.Counter",
        }),
        Value::Exception(e) => Value::Builtin(e.kind.clone()),
        Value::Func(_) | Value::Cached(_) | Value::Partial(_) => Value::builtin("function"),
        other => Value::builtin(other.type_name()),
    }
}

pub fn deep_copy(v: &Value, deep: bool) -> PyResult {
    let copy = |x: &Value| if deep { deep_copy(x, true) } else { Ok(x.clone()) };
    Ok(match v {
        Value::List(l) => Value::list(l.items.borrow().iter().map(copy).collect::<PyResult<_>>()?)?,
        Value::Tuple(t) if deep => Value::tuple(t.items.iter().map(copy).collect::<PyResult<_>>()?)?,
        Value::Dict(d) => Value::dict_of(
            d.kind,
            d.default_factory.clone(),
            d.map.borrow().values().map(|(k, v)| Ok((k.clone(), copy(v)?))).collect::<PyResult<_>>()?,
        )?,
        Value::Set(s) => Value::set(s.map.borrow().values().cloned().collect())?,
        other => other.clone(),
    })
}

fn heap_less(a: &Value, b: &Value) -> PyResult<bool> {
    Ok(a.py_cmp(b)? == Ordering::Less)
}

fn sift_down(heap: &mut [Value], start: usize, mut pos: usize) -> PyResult<()> {
    let item = heap[pos].clone();
    while pos > start {
        let parent = (pos - 1) / 2;
        if heap_less(&item, &heap[parent])? {
            heap[pos] = heap[parent].clone();
            pos = parent;
        } else {
            break;
        }
    }
    heap[pos] = item;
    Ok(())
}

fn sift_up(heap: &mut [Value], mut pos: usize) -> PyResult<()> {
    let end = heap.len();
    let start = pos;
    let item = heap[pos].clone();
    let mut child = 2 * pos + 1;
    while child < end {
        let right = child + 1;
        if right < end && !heap_less(&heap[child], &heap[right])? {
            child = right;
        }
        heap[pos] = heap[child].clone();
        pos = child;
        child = 2 * pos + 1;
    }
    heap[pos] = item;
    sift_down(heap, start, pos)
}

fn expect_list<'a>(v: &'a Value, func: &str) -> PyResult<&'a Rc<ListObj>> {
    match v {
        Value::List(l) => Ok(l),
        other => Err(type_error(format!("{func}() argument must be list, not {}", other.type_name()))),
    }
}

fn bisect_index(interp: &mut Interp, args: &mut Args, right: bool) -> PyResult<usize> {
    let key = args.kw("key").filter(|k| !matches!(k, Value::None));
    let lo = args.arg(2, "lo").map(|v| expect_int(&v, "bisect")).transpose()?.unwrap_or(0).max(0) as usize;
    let hi = args.arg(3, "hi").filter(|v| !matches!(v, Value::None));
    args.finish()?;
    let list = expect_list(&args.positional[0], &args.name)?.clone();
    let x = args.positional[1].clone();
    let items = list.items.borrow().clone();
    let mut hi = match hi {
        Some(h) => expect_int(&h, "bisect")?.max(0) as usize,
        None => items.len(),
    }
    .min(items.len());
    let mut lo = lo.min(hi);
    while lo < hi {
        let mid = (lo + hi) / 2;
        let probe = match &key {
            Some(k) => interp.call(k, vec![items[mid].clone()], Vec::new())?,
            None => items[mid].clone(),
        };
        let go_right = if right { x.py_cmp(&probe)? != Ordering::Less } else { probe.py_cmp(&x)? == Ordering::Less };
        if go_right {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn combinations_of(pool: &[Value], r: usize, replacement: bool, out: &mut Vec<Value>) -> PyResult<()> {
    let n = pool.len();
    if (!replacement && r > n) || (n == 0 && r > 0) {
        return Ok(());
    }
    let mut idx: Vec<usize> = if replacement { vec![0; r] } else { (0..r).collect() };
    loop {
        check_growth(out.len())?;
        out.push(Value::tuple(idx.iter().map(|&i| pool[i].clone()).collect())?);
        let mut i = r;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            let limit = if replacement { n - 1 } else { i + n - r };
            if idx[i] != limit {
                break;
            }
            if i == 0 {
                return Ok(());
            }
        }
        if idx[i] == if replacement { n - 1 } else { i + n - r } {
            return Ok(());
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = if replacement { idx[i] } else { idx[j - 1] + 1 };
        }
    }
}

fn permutations_of(pool: &[Value], r: usize, out: &mut Vec<Value>) -> PyResult<()> {
    fn rec(pool: &[Value], r: usize, used: &mut Vec<bool>, current: &mut Vec<Value>, out: &mut Vec<Value>) -> PyResult<()> {
        if current.len() == r {
            check_growth(out.len())?;
            out.push(Value::tuple(current.clone())?);
            return Ok(());
        }
        for i in 0..pool.len() {
            if !used[i] {
                used[i] = true;
                current.push(pool[i].clone());
                rec(pool, r, used, current, out)?;
                current.pop();
                used[i] = false;
            }
        }
        Ok(())
    }
    if r > pool.len() {
        return Ok(());
    }
    rec(pool, r, &mut vec![false; pool.len()], &mut Vec::new(), out)
}

// ---- dispatch ----

pub fn call_builtin(interp: &mut Interp, name: &str, positional: Vec<Value>, keywords: Vec<(String, Value)>) -> PyResult {
    let mut a = Args::new(name.rsplit('.').next().unwrap_or(name), positional, keywords);
    if is_exception_type(name) {
        a.finish()?;
        return Ok(Value::Exception(Rc::new(ExcObj { kind: name.into(), args: a.positional })));
    }
    if let Some(method) = name.strip_prefix("str.") {
        // unbound method: str.lower(s)
        a.arity(1, usize::MAX)?;
        let receiver = a.positional.remove(0);
        return call_method(interp, &receiver, method, a.positional, a.keywords);
    }
    match name {
        "print" => {
            a.kw("sep");
            a.kw("end");
            a.kw("flush");
            a.kw("file");
            Ok(Value::None)
        }
        "len" => {
            a.arity(1, 1)?;
            let n = match &a.positional[0] {
                Value::Str(s) => s.chars_len(),
                Value::List(l) => l.items.borrow().len(),
                Value::Tuple(t) => t.items.len(),
                Value::Dict(d) => d.map.borrow().len(),
                Value::Set(s) => s.map.borrow().len(),
                Value::Range(x, y, z) => range_len(*x, *y, *z) as usize,
                other => return Err(type_error(format!("object of type '{}' has no len()", other.type_name()))),
            };
            Ok(Value::Int(n as i64))
        }
        "range" => {
            a.finish()?;
            a.arity(1, 3)?;
            let ints = (0..a.positional.len()).map(|i| a.int(i)).collect::<PyResult<Vec<_>>>()?;
            let (start, stop, step) = match ints.as_slice() {
                [stop] => (0, *stop, 1),
                [start, stop] => (*start, *stop, 1),
                [start, stop, step] => (*start, *stop, *step),
                _ => unreachable!("arity checked"),
            };
            if step == 0 {
                return Err(value_error("range() arg 3 must not be zero"));
            }
            Ok(Value::Range(start, stop, step))
        }
        "abs" => {
            a.arity(1, 1)?;
            match &a.positional[0] {
                Value::Float(f) => Ok(Value::Float(f.abs())),
                v if v.as_int().is_some() => v.as_int().unwrap_or(0).checked_abs().map(Value::Int).ok_or_else(overflow),
                v => Err(type_error(format!("bad operand type for abs(): '{}'", v.type_name()))),
            }
        }
        "min" => extreme(interp, a, Ordering::Less),
        "max" => extreme(interp, a, Ordering::Greater),
        "sum" => {
            let start = a.arg(1, "start").unwrap_or(Value::Int(0));
            a.finish()?;
            a.arity(1, 2)?;
            let mut source = interp.source(&a.positional[0])?;
            let mut total = start;
            while let Some(v) = source.next(interp)? {
                total = binop(interp, &total, super::ast::BinOp::Add, &v)?;
            }
            Ok(total)
        }
        "sorted" => {
            let key = a.kw("key");
            let reverse = a.kw("reverse").is_some_and(|v| v.truthy());
            a.finish()?;
            a.arity(1, 1)?;
            let items = interp.collect(&a.positional[0])?;
            let sorted = sort_values(interp, items, key, reverse)?;
            Value::list(sorted)
        }
        "reversed" => {
            a.arity(1, 1)?;
            match &a.positional[0] {
                Value::Range(start, stop, step) => {
                    let n = range_len(*start, *stop, *step);
                    if n == 0 {
                        return Ok(Value::range_iter(0, 0, 1));
                    }
                    let last = start + (n - 1) * step;
                    Ok(Value::range_iter(last, start - step.signum(), -step))
                }
                v @ (Value::List(_) | Value::Tuple(_) | Value::Str(_) | Value::Dict(_)) => {
                    let mut items = interp.collect(v)?;
                    items.reverse();
                    Value::iter_of(items)
                }
                v => Err(type_error(format!("'{}' object is not reversible", v.type_name()))),
            }
        }
        "enumerate" => {
            let start = a.arg(1, "start").map(|v| expect_int(&v, "enumerate")).transpose()?.unwrap_or(0);
            a.finish()?;
            a.arity(1, 2)?;
            let mut source = interp.source(&a.positional[0])?;
            let mut out = VecDeque::new();
            let mut i = start;
            while let Some(v) = source.next(interp)? {
                check_growth(out.len())?;
                out.push_back(Value::tuple(vec![Value::Int(i), v])?);
                i += 1;
            }
            Value::iter_of(out)
        }
        "zip" => {
            let strict = a.kw("strict").is_some_and(|v| v.truthy());
            a.finish()?;
            let mut sources = a.positional.iter().map(|v| interp.source(v)).collect::<PyResult<Vec<_>>>()?;
            let mut out = VecDeque::new();
            if sources.is_empty() {
                return Value::iter_of(out);
            }
            'rows: loop {
                let mut row = Vec::with_capacity(sources.len());
                for (i, s) in sources.iter_mut().enumerate() {
                    match s.next(interp)? {
                        Some(v) => row.push(v),
                        None => {
                            if strict && i > 0 {
                                return Err(value_error("zip() arguments have different lengths"));
                            }
                            break 'rows;
                        }
                    }
                }
                check_growth(out.len())?;
                out.push_back(Value::tuple(row)?);
            }
            Value::iter_of(out)
        }
        "map" => {
            a.finish()?;
            a.arity(2, usize::MAX)?;
            let func = a.positional[0].clone();
            let mut sources = a.positional[1..].iter().map(|v| interp.source(v)).collect::<PyResult<Vec<_>>>()?;
            let mut out = VecDeque::new();
            'rows: loop {
                let mut row = Vec::with_capacity(sources.len());
                for s in sources.iter_mut() {
                    match s.next(interp)? {
                        Some(v) => row.push(v),
                        None => break 'rows,
                    }
                }
                check_growth(out.len())?;
                out.push_back(interp.call(&func, row, Vec::new())?);
            }
            Value::iter_of(out)
        }
        "filter" => {
            a.arity(2, 2)?;
            let func = a.positional[0].clone();
            let mut source = interp.source(&a.positional[1])?;
            let mut out = VecDeque::new();
            while let Some(v) = source.next(interp)? {
                let keep = match &func {
                    Value::None => v.truthy(),
                    f => interp.call(f, vec![v.clone()], Vec::new())?.truthy(),
                };
                if keep {
                    out.push_back(v);
                }
            }
            Value::iter_of(out)
        }
        "any" | "all" => {
            a.arity(1, 1)?;
            let want = name == "any";
            let mut source = interp.source(&a.positional[0])?;
            while let Some(v) = source.next(interp)? {
                if v.truthy() == want {
                    return Ok(Value::Bool(want));
                }
            }
            Ok(Value::Bool(!want))
        }
        "int" => {
            let base = a.arg(1, "base");
            a.finish()?;
            a.arity(0, 2)?;
            let Some(x) = a.positional.first().cloned() else { return Ok(Value::Int(0)) };
            match (&x, base) {
                (Value::Str(s), base) => {
                    let base = base.map(|b| expect_int(&b, "int")).transpose()?.unwrap_or(10);
                    parse_int(&s.text, base).map(Value::Int)
                }
                (_, Some(_)) => Err(type_error("int() can't convert non-string with explicit base")),
                (Value::Float(f), None) => int_of_float(f.trunc()).map(Value::Int),
                (v, None) if v.as_int().is_some() => Ok(Value::Int(v.as_int().unwrap_or(0))),
                (v, None) => Err(type_error(format!(
                    "int() argument must be a string, a bytes-like object or a real number, not '{}'",
                    v.type_name()
                ))),
            }
        }
        "float" => {
            a.arity(0, 1)?;
            match a.positional.first() {
                None => Ok(Value::Float(0.0)),
                Some(Value::Str(s)) => parse_float(&s.text).map(Value::Float),
                Some(v) => v
                    .as_f64()
                    .map(Value::Float)
                    .ok_or_else(|| type_error(format!("float() argument must be a string or a real number, not '{}'", v.type_name()))),
            }
        }
        "str" => {
            a.arity(0, 1)?;
            match a.positional.first() {
                None => Value::str(""),
                Some(v) => Value::str(v.to_str()),
            }
        }
        "repr" => {
            a.arity(1, 1)?;
            Value::str(a.positional[0].repr())
        }
        "format" => {
            a.arity(1, 2)?;
            let spec = a.positional.get(1).and_then(Value::as_str).unwrap_or("").to_string();
            Value::str(format_value(&a.positional[0], &spec)?)
        }
        "bool" => {
            a.arity(0, 1)?;
            Ok(Value::Bool(a.positional.first().is_some_and(Value::truthy)))
        }
        "list" | "collections.deque" => {
            a.kw("maxlen");
            a.finish()?;
            a.arity(0, 1)?;
            match a.positional.first() {
                None => Value::list(Vec::new()),
                Some(v) => {
                    let items = interp.collect(v)?;
                    Value::list(items)
                }
            }
        }
        "tuple" => {
            a.arity(0, 1)?;
            match a.positional.first() {
                None => Value::tuple(Vec::new()),
                Some(Value::Tuple(t)) => Ok(Value::Tuple(t.clone())),
                Some(v) => {
                    let items = interp.collect(v)?;
                    Value::tuple(items)
                }
            }
        }
        "set" | "frozenset" => {
            a.arity(0, 1)?;
            match a.positional.first() {
                None => Value::set(Vec::new()),
                Some(v) => {
                    let items = interp.collect(v)?;
                    Value::set(items)
                }
            }
        }
        "dict" | "collections.OrderedDict" => {
            a.arity(0, 1)?;
            let mut entries = match a.positional.first() {
                None => Vec::new(),
                Some(v) => mapping_entries(interp, v)?,
            };
            for (k, v) in std::mem::take(&mut a.keywords) {
                entries.push((Value::str(k)?, v));
            }
            Value::dict(entries)
        }
        "dict.fromkeys" => {
            a.arity(1, 2)?;
            let value = a.positional.get(1).cloned().unwrap_or(Value::None);
            let keys = interp.collect(&a.positional[0])?;
            Value::dict(keys.into_iter().map(|k| (k, value.clone())).collect())
        }
        "collections.defaultdict" => {
            a.arity(0, 2)?;
            let factory = a.positional.first().cloned().filter(|f| !matches!(f, Value::None));
            if let Some(f) = &factory {
                if !is_callable(f) {
                    return Err(type_error("first argument must be callable or None"));
                }
            }
            let entries = match a.positional.get(1) {
                Some(v) => mapping_entries(interp, v)?,
                None => Vec::new(),
            };
            Value::dict_of(DictKind::Default, factory, entries)
        }
        "collections.Counter" => {
            a.arity(0, 1)?;
            let counter = Value::dict_of(DictKind::Counter, None, Vec::new())?;
            if let Value::Dict(d) = &counter {
                if let Some(src) = a.positional.first() {
                    counter_update(interp, d, src)?;
                }
                for (k, v) in std::mem::take(&mut a.keywords) {
                    d.insert(Value::str(k)?, v)?;
                }
            }
            Ok(counter)
        }
        "isinstance" => {
            a.arity(2, 2)?;
            Ok(Value::Bool(isinstance_of(&a.positional[0], &a.positional[1])?))
        }
        "issubclass" => {
            a.arity(2, 2)?;
            match (&a.positional[0], &a.positional[1]) {
                (Value::Builtin(x), Value::Builtin(y)) => {
                    Ok(Value::Bool(x == y || exception_matches(x, y) || (&**x == "bool" && &**y == "int")))
                }
                _ => Err(type_error("issubclass() arg 1 must be a class")),
            }
        }
        "type" => {
            a.arity(1, 1)?;
            Ok(type_of(&a.positional[0]))
        }
        "round" => py_round(&mut a),
        "divmod" => {
            a.arity(2, 2)?;
            let (x, y) = (&a.positional[0], &a.positional[1]);
            if let (Some(x), Some(y)) = (x.as_int(), y.as_int()) {
                return Value::tuple(vec![Value::Int(int_floordiv(x, y)?), Value::Int(int_mod(x, y)?)]);
            }
            let (x, y) = (a.float(0)?, a.float(1)?);
            let m = float_mod(x, y)?;
            Value::tuple(vec![Value::Float(((x - m) / y).round()), Value::Float(m)])
        }
        "pow" | "math.pow" => {
            a.arity(2, 3)?;
            if name == "math.pow" {
                return binop(interp, &Value::Float(a.float(0)?), super::ast::BinOp::Pow, &Value::Float(a.float(1)?));
            }
            match a.positional.get(2) {
                None => binop(interp, &a.positional[0], super::ast::BinOp::Pow, &a.positional[1]),
                Some(m) => {
                    let (base, exp, m) = (a.int(0)?, a.int(1)?, expect_int(m, "pow")?);
                    if m == 0 {
                        return Err(value_error("pow() 3rd argument cannot be 0"));
                    }
                    if exp < 0 {
                        return Err(value_error("negative exponents with a modulus are not supported"));
                    }
                    let modulus = i128::from(m).abs();
                    let mut result: i128 = 1 % modulus;
                    let mut b = i128::from(base).rem_euclid(modulus);
                    let mut e = exp;
                    while e > 0 {
                        if e & 1 == 1 {
                            result = result * b % modulus;
                        }
                        b = b * b % modulus;
                        e >>= 1;
                    }
                    let result = if m < 0 && result != 0 { result - modulus } else { result };
                    Ok(Value::Int(result as i64))
                }
            }
        }
        "chr" => {
            a.arity(1, 1)?;
            let code = a.int(0)?;
            let c = u32::try_from(code).ok().and_then(char::from_u32).ok_or_else(|| value_error("chr() arg not in range(0x110000)"))?;
            Value::str(c.to_string())
        }
        "ord" => {
            a.arity(1, 1)?;
            match &a.positional[0] {
                Value::Str(s) if s.chars_len() == 1 => Ok(Value::Int(s.text.chars().next().map_or(0, |c| c as i64))),
                Value::Str(s) => Err(type_error(format!(
                    "ord() expected a character, but string of length {} found",
                    s.chars_len()
                ))),
                v => Err(type_error(format!("ord() expected string of length 1, but {} found", v.type_name()))),
            }
        }
        "hex" | "bin" | "oct" => {
            a.arity(1, 1)?;
            let n = a.int(0)?;
            let sign = if n < 0 { "-" } else { "" };
            let m = n.unsigned_abs();
            Value::str(match name {
                "hex" => format!("{sign}0x{m:x}"),
                "bin" => format!("{sign}0b{m:b}"),
                _ => format!("{sign}0o{m:o}"),
            })
        }
        "iter" => {
            a.arity(1, 1)?;
            match &a.positional[0] {
                v @ Value::Iter(_) => Ok(v.clone()),
                Value::Range(x, y, z) => Ok(Value::range_iter(*x, *y, *z)),
                v => {
                    let items = interp.collect(v)?;
                    Value::iter_of(items)
                }
            }
        }
        "next" => {
            a.arity(1, 2)?;
            match &a.positional[0] {
                Value::Iter(it) => match it.next() {
                    Some(v) => Ok(v),
                    None => match a.positional.get(1) {
                        Some(d) => Ok(d.clone()),
                        None => Err(exc("StopIteration", "")),
                    },
                },
                v => Err(type_error(format!("'{}' object is not an iterator", v.type_name()))),
            }
        }
        "hash" => {
            a.arity(1, 1)?;
            Ok(Value::Int(hash_value(&a.positional[0])?))
        }
        "callable" => {
            a.arity(1, 1)?;
            Ok(Value::Bool(is_callable(&a.positional[0])))
        }
        "id" => {
            a.arity(1, 1)?;
            Ok(Value::Int(a.positional[0].identity() as i64))
        }
        "getattr" | "hasattr" => {
            a.arity(2, 3)?;
            let attr = a.positional[1].as_str().ok_or_else(|| type_error("attribute name must be string"))?.to_string();
            let found = get_attr(interp, &a.positional[0], &attr);
            match (name, found) {
                ("hasattr", Ok(_)) => Ok(Value::Bool(true)),
                ("hasattr", Err(Flow::Exc(_))) => Ok(Value::Bool(false)),
                (_, Err(Flow::Exc(e))) if &*e.kind == "AttributeError" && a.positional.len() == 3 => {
                    Ok(a.positional[2].clone())
                }
                (_, other) => other,
            }
        }
        "input" => Err(exc("RuntimeError", "input() is not available in the sandbox")),
        "open" => Err(exc("RuntimeError", "file system access is not available in the sandbox")),
        "math.prod" | "math.fsum" => call_iterable_math(interp, &name[5..], &mut a),
        n if n.starts_with("math.") => math_call(&mut a, &n[5..]),
        n if n.starts_with("functools.")
            || n.starts_with("itertools.")
            || n.starts_with("heapq.")
            || n.starts_with("bisect.")
            || n.starts_with("sys.")
            || n.starts_with("operator.")
            || n.starts_with("copy.") =>
        {
            library_call(interp, n, a)
        }
        n if n.starts_with("typing.") => Err(type_error(format!("Type {n} cannot be instantiated"))),
        other => Err(type_error(format!("'{other}' object is not callable"))),
    }
}

fn mapping_entries(interp: &mut Interp, v: &Value) -> PyResult<Vec<(Value, Value)>> {
    if let Value::Dict(d) = v {
        return Ok(d.map.borrow().values().cloned().collect());
    }
    let items = interp.collect(v)?;
    items
        .into_iter()
        .map(|pair| {
            let parts = interp.collect(&pair)?;
            match <[Value; 2]>::try_from(parts) {
                Ok([k, v]) => Ok((k, v)),
                Err(parts) => Err(value_error(format!(
                    "dictionary update sequence element has length {}; 2 is required",
                    parts.len()
                ))),
            }
        })
        .collect()
}

pub fn counter_update(interp: &mut Interp, d: &Rc<DictObj>, src: &Value) -> PyResult<()> {
    if let Value::Dict(other) = src {
        let entries: Vec<(Value, Value)> = other.map.borrow().values().cloned().collect();
        for (k, v) in entries {
            let current = d.get(&k.hash_key()?).unwrap_or(Value::Int(0));
            let sum = binop(interp, &current, super::ast::BinOp::Add, &v)?;
            d.insert(k, sum)?;
        }
        return Ok(());
    }
    let mut source = interp.source(src)?;
    while let Some(v) = source.next(interp)? {
        let hk = v.hash_key()?;
        let current = d.get(&hk).and_then(|c| c.as_int()).unwrap_or(0);
        d.insert(v, Value::Int(current + 1))?;
    }
    Ok(())
}

fn math_call(a: &mut Args, func: &str) -> PyResult {
    let unary_float = |a: &Args, f: fn(f64) -> f64| -> PyResult {
        a.arity(1, 1)?;
        Ok(Value::Float(f(a.float(0)?)))
    };
    let domain = || value_error("math domain error");
    match func {
        "sqrt" => {
            a.arity(1, 1)?;
            let x = a.float(0)?;
            if x < 0.0 {
                return Err(domain());
            }
            Ok(Value::Float(x.sqrt()))
        }
        "isqrt" => {
            a.arity(1, 1)?;
            let n = a.int(0)?;
            if n < 0 {
                return Err(value_error("isqrt() argument must be nonnegative"));
            }
            let mut r = (n as f64).sqrt() as i64;
            while r > 0 && r.checked_mul(r).is_none_or(|sq| sq > n) {
                r -= 1;
            }
            while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
                r += 1;
            }
            Ok(Value::Int(r))
        }
        "floor" | "ceil" | "trunc" => {
            a.arity(1, 1)?;
            if let Some(i) = a.positional[0].as_int() {
                return Ok(Value::Int(i));
            }
            let x = a.float(0)?;
            let r = match func {
                "floor" => x.floor(),
                "ceil" => x.ceil(),
                _ => x.trunc(),
            };
            int_of_float(r).map(Value::Int)
        }
        "gcd" | "lcm" => {
            let values = (0..a.positional.len()).map(|i| a.int(i)).collect::<PyResult<Vec<_>>>()?;
            if func == "gcd" {
                return Ok(Value::Int(values.into_iter().fold(0, gcd)));
            }
            values
                .into_iter()
                .try_fold(1i64, |acc, v| {
                    if acc == 0 || v == 0 {
                        return Ok(0);
                    }
                    (acc / gcd(acc, v)).checked_mul(v.abs()).ok_or_else(overflow)
                })
                .map(Value::Int)
        }
        "factorial" => {
            a.arity(1, 1)?;
            let n = a.int(0)?;
            if n < 0 {
                return Err(value_error("factorial() not defined for negative values"));
            }
            checked_product(1..=n).map(Value::Int)
        }
        "comb" => {
            a.arity(2, 2)?;
            comb(a.int(0)?, a.int(1)?).map(Value::Int)
        }
        "perm" => {
            a.arity(1, 2)?;
            let n = a.int(0)?;
            let k = if a.positional.len() == 2 { a.int(1)? } else { n };
            if n < 0 || k < 0 {
                return Err(value_error("n and k must be non-negative integers"));
            }
            if k > n {
                return Ok(Value::Int(0));
            }
            checked_product(n - k + 1..=n).map(Value::Int)
        }
        "exp" => unary_float(a, f64::exp).and_then(|v| match v {
            Value::Float(f) if f.is_infinite() => Err(exc("OverflowError", "math range error")),
            v => Ok(v),
        }),
        "log" => {
            a.arity(1, 2)?;
            let x = a.float(0)?;
            if x <= 0.0 {
                return Err(domain());
            }
            match a.positional.get(1) {
                None => Ok(Value::Float(x.ln())),
                Some(b) => {
                    let b = expect_float(b, "log")?;
                    if b <= 0.0 || b == 1.0 {
                        return Err(domain());
                    }
                    Ok(Value::Float(x.ln() / b.ln()))
                }
            }
        }
        "log2" | "log10" => {
            a.arity(1, 1)?;
            let x = a.float(0)?;
            if x <= 0.0 {
                return Err(domain());
            }
            Ok(Value::Float(if func == "log2" { x.log2() } else { x.log10() }))
        }
        "fabs" => unary_float(a, f64::abs),
        "sin" => unary_float(a, f64::sin),
        "cos" => unary_float(a, f64::cos),
        "tan" => unary_float(a, f64::tan),
        "asin" | "acos" => {
            a.arity(1, 1)?;
            let x = a.float(0)?;
            if !(-1.0..=1.0).contains(&x) {
                return Err(domain());
            }
            Ok(Value::Float(if func == "asin" { x.asin() } else { x.acos() }))
        }
        "atan" => unary_float(a, f64::atan),
        "degrees" => unary_float(a, f64::to_degrees),
        "radians" => unary_float(a, f64::to_radians),
        "atan2" | "copysign" | "fmod" => {
            a.arity(2, 2)?;
            let (x, y) = (a.float(0)?, a.float(1)?);
            Ok(Value::Float(match func {
                "atan2" => x.atan2(y),
                "copysign" => x.copysign(y),
                _ => {
                    if y == 0.0 {
                        return Err(domain());
                    }
                    x % y
                }
            }))
        }
        "hypot" => {
            let values = (0..a.positional.len()).map(|i| a.float(i)).collect::<PyResult<Vec<_>>>()?;
            Ok(Value::Float(values.iter().map(|v| v * v).sum::<f64>().sqrt()))
        }
        "dist" => Err(type_error("math.dist is not supported")),
        "isclose" => {
            let rel = a.kw("rel_tol").map(|v| expect_float(&v, "isclose")).transpose()?.unwrap_or(1e-9);
            let abs = a.kw("abs_tol").map(|v| expect_float(&v, "isclose")).transpose()?.unwrap_or(0.0);
            a.finish()?;
            a.arity(2, 2)?;
            let (x, y) = (a.float(0)?, a.float(1)?);
            Ok(Value::Bool(x == y || (x - y).abs() <= (rel * x.abs().max(y.abs())).max(abs)))
        }
        "isinf" | "isnan" | "isfinite" => {
            a.arity(1, 1)?;
            let x = a.float(0)?;
            Ok(Value::Bool(match func {
                "isinf" => x.is_infinite(),
                "isnan" => x.is_nan(),
                _ => x.is_finite(),
            }))
        }
        "prod" | "fsum" => Err(type_error(format!("math.{func} requires an iterable"))),
        other => Err(exc("AttributeError", format!("module 'math' has no attribute '{other}'"))),
    }
}

fn library_call(interp: &mut Interp, name: &str, mut a: Args) -> PyResult {
    match name {
        "functools.reduce" => {
            a.arity(2, 3)?;
            let func = a.positional[0].clone();
            let mut source = interp.source(&a.positional[1])?;
            let mut acc = match a.positional.get(2) {
                Some(init) => init.clone(),
                None => source
                    .next(interp)?
                    .ok_or_else(|| type_error("reduce() of empty iterable with no initial value"))?,
            };
            while let Some(v) = source.next(interp)? {
                acc = interp.call(&func, vec![acc, v], Vec::new())?;
            }
            Ok(acc)
        }
        "functools.lru_cache" | "functools.cache" => {
            a.kw("maxsize");
            a.kw("typed");
            a.finish()?;
            match a.positional.first() {
                Some(f) if is_callable(f) => Ok(Value::Cached(Rc::new(CachedObj {
                    func: f.clone(),
                    memo: Default::default(),
                }))),
                _ => Ok(Value::builtin("functools.cache")),
            }
        }
        "functools.partial" => {
            a.arity(1, usize::MAX)?;
            let func = a.positional.remove(0);
            Ok(Value::Partial(Rc::new(PartialObj { func, args: a.positional, kwargs: a.keywords })))
        }
        "functools.cmp_to_key" => {
            a.arity(1, 1)?;
            Ok(Value::Partial(Rc::new(PartialObj {
                func: Value::builtin("functools.cmp_to_key"),
                args: a.positional,
                kwargs: Vec::new(),
            })))
        }
        "itertools.permutations" => {
            a.arity(1, 2)?;
            let pool = interp.collect(&a.positional[0])?;
            let r = match a.positional.get(1) {
                Some(Value::None) | None => pool.len(),
                Some(r) => expect_int(r, "permutations")?.max(0) as usize,
            };
            let mut out = Vec::new();
            permutations_of(&pool, r, &mut out)?;
            interp.tick()?;
            Value::iter_of(out)
        }
        "itertools.combinations" | "itertools.combinations_with_replacement" => {
            a.arity(2, 2)?;
            let pool = interp.collect(&a.positional[0])?;
            let r = a.int(1)?;
            if r < 0 {
                return Err(value_error("r must be non-negative"));
            }
            let mut out = Vec::new();
            combinations_of(&pool, r as usize, name.ends_with("replacement"), &mut out)?;
            Value::iter_of(out)
        }
        "itertools.product" => {
            let repeat = a.kw("repeat").map(|v| expect_int(&v, "product")).transpose()?.unwrap_or(1).max(0) as usize;
            a.finish()?;
            let pools = a.positional.iter().map(|p| interp.collect(p)).collect::<PyResult<Vec<_>>>()?;
            let pools: Vec<Vec<Value>> = (0..repeat).flat_map(|_| pools.iter().cloned()).collect();
            let mut rows: Vec<Vec<Value>> = vec![Vec::new()];
            for pool in &pools {
                let mut next = Vec::with_capacity(rows.len() * pool.len());
                for row in &rows {
                    for item in pool {
                        check_growth(next.len())?;
                        let mut r = row.clone();
                        r.push(item.clone());
                        next.push(r);
                    }
                }
                ensure_room(next.len() * std::mem::size_of::<Value>() * (pools.len() + 1))?;
                rows = next;
            }
            let out = rows.into_iter().map(Value::tuple).collect::<PyResult<Vec<_>>>()?;
            Value::iter_of(out)
        }
        "itertools.accumulate" => {
            let initial = a.kw("initial");
            let func = a.arg(1, "func").filter(|f| !matches!(f, Value::None));
            a.finish()?;
            let mut source = interp.source(&a.positional[0])?;
            let mut out = VecDeque::new();
            let mut acc = initial;
            if let Some(v) = &acc {
                out.push_back(v.clone());
            }
            while let Some(v) = source.next(interp)? {
                let next = match (&acc, &func) {
                    (None, _) => v,
                    (Some(prev), Some(f)) => interp.call(f, vec![prev.clone(), v], Vec::new())?,
                    (Some(prev), None) => binop(interp, prev, super::ast::BinOp::Add, &v)?,
                };
                check_growth(out.len())?;
                out.push_back(next.clone());
                acc = Some(next);
            }
            Value::iter_of(out)
        }
        "itertools.chain" | "itertools.chain.from_iterable" => {
            let iterables = if name.ends_with("from_iterable") {
                a.arity(1, 1)?;
                interp.collect(&a.positional[0])?
            } else {
                a.positional.clone()
            };
            let mut out = VecDeque::new();
            for it in iterables {
                let items = interp.collect(&it)?;
                check_growth(out.len() + items.len())?;
                out.extend(items);
            }
            Value::iter_of(out)
        }
        "itertools.islice" => {
            a.arity(2, 4)?;
            let bound = |v: Option<&Value>, default: i64| -> PyResult<i64> {
                match v {
                    None | Some(Value::None) => Ok(default),
                    Some(v) => expect_int(v, "islice"),
                }
            };
            let (start, stop, step) = if a.positional.len() == 2 {
                (0, bound(a.positional.get(1), i64::MAX)?, 1)
            } else {
                (
                    bound(a.positional.get(1), 0)?,
                    bound(a.positional.get(2), i64::MAX)?,
                    bound(a.positional.get(3), 1)?,
                )
            };
            if start < 0 || stop < 0 || step <= 0 {
                return Err(value_error("Indices for islice() must be None or an integer: 0 <= x <= sys.maxsize."));
            }
            let mut source = interp.source(&a.positional[0])?;
            let mut out = VecDeque::new();
            let mut i = 0i64;
            while i < stop {
                let Some(v) = source.next(interp)? else { break };
                if i >= start && (i - start) % step == 0 {
                    check_growth(out.len())?;
                    out.push_back(v);
                }
                i += 1;
            }
            Value::iter_of(out)
        }
        "itertools.groupby" => {
            let key = a.arg(1, "key").filter(|k| !matches!(k, Value::None));
            a.finish()?;
            let items = interp.collect(&a.positional[0])?;
            let mut groups: Vec<(Value, Vec<Value>)> = Vec::new();
            for item in items {
                let k = match &key {
                    Some(f) => interp.call(f, vec![item.clone()], Vec::new())?,
                    None => item.clone(),
                };
                match groups.last_mut() {
                    Some((gk, members)) if gk.py_eq(&k) => members.push(item),
                    _ => groups.push((k, vec![item])),
                }
            }
            let out = groups
                .into_iter()
                .map(|(k, members)| Value::tuple(vec![k, Value::iter_of(members)?]))
                .collect::<PyResult<Vec<_>>>()?;
            Value::iter_of(out)
        }
        "itertools.zip_longest" => {
            let fill = a.kw("fillvalue").unwrap_or(Value::None);
            a.finish()?;
            let columns = a.positional.iter().map(|p| interp.collect(p)).collect::<PyResult<Vec<_>>>()?;
            let longest = columns.iter().map(Vec::len).max().unwrap_or(0);
            let out = (0..longest)
                .map(|i| Value::tuple(columns.iter().map(|c| c.get(i).cloned().unwrap_or_else(|| fill.clone())).collect()))
                .collect::<PyResult<Vec<_>>>()?;
            Value::iter_of(out)
        }
        "itertools.pairwise" => {
            a.arity(1, 1)?;
            let items = interp.collect(&a.positional[0])?;
            let out = items
                .windows(2)
                .map(|w| Value::tuple(w.to_vec()))
                .collect::<PyResult<Vec<_>>>()?;
            Value::iter_of(out)
        }
        "itertools.starmap" => {
            a.arity(2, 2)?;
            let func = a.positional[0].clone();
            let rows = interp.collect(&a.positional[1])?;
            let mut out = VecDeque::new();
            for row in rows {
                let args = interp.collect(&row)?;
                out.push_back(interp.call(&func, args, Vec::new())?);
            }
            Value::iter_of(out)
        }
        "itertools.repeat" => {
            let times = a.arg(1, "times");
            a.finish()?;
            let Some(times) = times else {
                return Err(value_error("itertools.repeat without a count is not supported"));
            };
            let n = expect_int(&times, "repeat")?.max(0) as usize;
            ensure_room(n.saturating_mul(std::mem::size_of::<Value>()))?;
            Value::iter_of(vec![a.positional[0].clone(); n])
        }
        "itertools.count" => {
            let start = a.arg(0, "start").map(|v| expect_int(&v, "count")).transpose()?.unwrap_or(0);
            let step = a.arg(1, "step").map(|v| expect_int(&v, "count")).transpose()?.unwrap_or(1);
            a.finish()?;
            if step == 0 {
                return Err(value_error("count() with a zero step is not supported"));
            }
            Ok(Value::range_iter(start, if step > 0 { i64::MAX } else { i64::MIN }, step))
        }
        "heapq.heappush" => {
            a.arity(2, 2)?;
            let list = expect_list(&a.positional[0], "heappush")?;
            let mut heap = list.items.borrow_mut();
            heap.push(a.positional[1].clone());
            let last = heap.len() - 1;
            sift_down(&mut heap, 0, last)?;
            drop(heap);
            list.sync()?;
            Ok(Value::None)
        }
        "heapq.heappop" => {
            a.arity(1, 1)?;
            let list = expect_list(&a.positional[0], "heappop")?;
            let mut heap = list.items.borrow_mut();
            let last = heap.pop().ok_or_else(|| exc("IndexError", "index out of range"))?;
            let result = if heap.is_empty() {
                last
            } else {
                let top = std::mem::replace(&mut heap[0], last);
                sift_up(&mut heap, 0)?;
                top
            };
            drop(heap);
            list.sync()?;
            Ok(result)
        }
        "heapq.heappushpop" | "heapq.heapreplace" => {
            a.arity(2, 2)?;
            let list = expect_list(&a.positional[0], &a.name)?;
            let item = a.positional[1].clone();
            let mut heap = list.items.borrow_mut();
            if name.ends_with("heappushpop") && (heap.is_empty() || !heap_less(&heap[0], &item)?) {
                return Ok(item);
            }
            if heap.is_empty() {
                return Err(exc("IndexError", "index out of range"));
            }
            let top = std::mem::replace(&mut heap[0], item);
            sift_up(&mut heap, 0)?;
            Ok(top)
        }
        "heapq.heapify" => {
            a.arity(1, 1)?;
            let list = expect_list(&a.positional[0], "heapify")?;
            let mut heap = list.items.borrow_mut();
            for i in (0..heap.len() / 2).rev() {
                sift_up(&mut heap, i)?;
            }
            Ok(Value::None)
        }
        "heapq.nlargest" | "heapq.nsmallest" => {
            let key = a.kw("key");
            a.finish()?;
            a.arity(2, 2)?;
            let n = a.int(0)?.max(0) as usize;
            let items = interp.collect(&a.positional[1])?;
            let mut sorted = sort_values(interp, items, key, name.ends_with("nlargest"))?;
            sorted.truncate(n);
            Value::list(sorted)
        }
        "bisect.bisect_left" | "bisect.bisect_right" | "bisect.bisect" => {
            a.arity(2, 4)?;
            bisect_index(interp, &mut a, !name.ends_with("left")).map(|i| Value::Int(i as i64))
        }
        "bisect.insort" | "bisect.insort_left" | "bisect.insort_right" => {
            a.arity(2, 4)?;
            let i = bisect_index(interp, &mut a, !name.ends_with("left"))?;
            let list = expect_list(&a.positional[0], &a.name)?;
            list.items.borrow_mut().insert(i, a.positional[1].clone());
            list.sync()?;
            Ok(Value::None)
        }
        "sys.setrecursionlimit" => {
            a.arity(1, 1)?;
            let n = a.int(0)?;
            if n < 1 {
                return Err(value_error("recursion limit must be greater or equal than 1"));
            }
            interp.recursion_limit = (n as usize).min(MAX_RECURSION_LIMIT);
            Ok(Value::None)
        }
        "sys.getrecursionlimit" => Ok(Value::Int(interp.recursion_limit as i64)),
        "operator.itemgetter" => {
            a.arity(1, 1)?;
            Ok(Value::Partial(Rc::new(PartialObj {
                func: Value::builtin("operator._itemget"),
                args: a.positional,
                kwargs: Vec::new(),
            })))
        }
        "operator._itemget" => {
            a.arity(2, 2)?;
            get_item(interp, &a.positional[1], &a.positional[0])
        }
        "operator.neg" => {
            a.arity(1, 1)?;
            unary(super::ast::UnaryOp::Neg, &a.positional[0])
        }
        "operator.add" | "operator.sub" | "operator.mul" | "operator.truediv" | "operator.floordiv" | "operator.mod" => {
            use super::ast::BinOp;
            a.arity(2, 2)?;
            let op = match name {
                "operator.add" => BinOp::Add,
                "operator.sub" => BinOp::Sub,
                "operator.mul" => BinOp::Mul,
                "operator.truediv" => BinOp::Div,
                "operator.floordiv" => BinOp::FloorDiv,
                _ => BinOp::Mod,
            };
            binop(interp, &a.positional[0], op, &a.positional[1])
        }
        "copy.copy" | "copy.deepcopy" => {
            a.arity(1, 1)?;
            deep_copy(&a.positional[0], name.ends_with("deepcopy"))
        }
        other => Err(exc("AttributeError", format!("'{other}' is not supported"))),
    }
}

/// `math.prod` / `math.fsum` need the interpreter to iterate.
pub fn call_iterable_math(interp: &mut Interp, func: &str, a: &mut Args) -> PyResult {
    let start = a.kw("start").unwrap_or(Value::Int(1));
    a.finish()?;
    a.arity(1, 1)?;
    let items = interp.collect(&a.positional[0])?;
    if func == "fsum" {
        let values = items.iter().map(|v| expect_float(v, "fsum")).collect::<PyResult<Vec<_>>>()?;
        // Neumaier summation keeps the result correctly rounded in practice
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for v in values {
            let t = sum + v;
            comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
            sum = t;
        }
        return Ok(Value::Float(sum + comp));
    }
    let mut acc = start;
    for v in items {
        acc = binop(interp, &acc, super::ast::BinOp::Mul, &v)?;
    }
    Ok(acc)
}
