//! Runtime values, heap accounting and the Python-compatible object protocol
//! (equality, hashing, ordering, `repr`).

use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::rc::Rc;

use indexmap::IndexMap;

use super::ast::FuncDef;
use crate::verification::literal::{render_float, render_str, Literal};

// ---- heap accounting ----

thread_local! {
    static HEAP_USED: Cell<usize> = const { Cell::new(0) };
    static HEAP_LIMIT: Cell<usize> = const { Cell::new(usize::MAX) };
}

/// Fixed per-object overhead charged on top of payload bytes.
const OBJECT_OVERHEAD: usize = 48;
const SLOT: usize = std::mem::size_of::<Value>();

pub(crate) fn set_heap_limit(limit: usize) {
    HEAP_USED.with(|u| u.set(0));
    HEAP_LIMIT.with(|l| l.set(limit));
}

pub(crate) fn heap_limit() -> usize {
    HEAP_LIMIT.with(Cell::get)
}

pub(crate) fn heap_used() -> usize {
    HEAP_USED.with(Cell::get)
}

/// Reserves `bytes` of interpreter heap, failing without side effects when
/// the budget would be exceeded.
pub fn charge(bytes: usize) -> Result<(), Flow> {
    let limit = HEAP_LIMIT.with(Cell::get);
    HEAP_USED.with(|u| {
        let next = u.get().saturating_add(bytes);
        if next > limit {
            Err(Flow::Memory)
        } else {
            u.set(next);
            Ok(())
        }
    })
}

fn refund(bytes: usize) {
    HEAP_USED.with(|u| u.set(u.get().saturating_sub(bytes)));
}

/// Charged size follows the payload; the object refunds whatever it holds
/// when dropped.
#[derive(Debug, Default)]
pub struct Charge(Cell<usize>);

impl Charge {
    fn resize(&self, bytes: usize) -> Result<(), Flow> {
        let held = self.0.get();
        if bytes > held {
            charge(bytes - held)?;
        } else {
            refund(held - bytes);
        }
        self.0.set(bytes);
        Ok(())
    }
}

impl Drop for Charge {
    fn drop(&mut self) {
        refund(self.0.get());
    }
}

// ---- control flow ----

#[derive(Debug, Clone)]
pub enum Flow {
    Exc(Rc<ExcObj>),
    Return(Value),
    Break,
    Continue,
    /// Step budget or deadline exhausted; not catchable.
    Timeout,
    /// Heap budget exhausted; not catchable.
    Memory,
}

pub type PyResult<T = Value> = Result<T, Flow>;

#[derive(Debug)]
pub struct ExcObj {
    pub kind: Rc<str>,
    pub args: Vec<Value>,
}

impl ExcObj {
    pub fn message(&self) -> String {
        match self.args.as_slice() {
            [] => String::new(),
            [single] => single.to_str(),
            many => Value::tuple_unchecked(many.to_vec()).repr(),
        }
    }

    /// `Kind: message` as the last traceback line would show.
    pub fn describe(&self) -> String {
        let message = self.message();
        if message.is_empty() {
            self.kind.to_string()
        } else {
            format!("{}: {}", self.kind, message)
        }
    }
}

pub fn exc(kind: &str, message: impl Into<String>) -> Flow {
    let message = message.into();
    let args = if message.is_empty() { Vec::new() } else { vec![Value::str_unchecked(message)] };
    Flow::Exc(Rc::new(ExcObj { kind: kind.into(), args }))
}

pub fn type_error(message: impl Into<String>) -> Flow {
    exc("TypeError", message)
}

pub fn value_error(message: impl Into<String>) -> Flow {
    exc("ValueError", message)
}

pub const EXCEPTION_TYPES: &[(&str, &str)] = &[
    ("BaseException", ""),
    ("Exception", "BaseException"),
    ("ArithmeticError", "Exception"),
    ("ZeroDivisionError", "ArithmeticError"),
    ("OverflowError", "ArithmeticError"),
    ("AssertionError", "Exception"),
    ("AttributeError", "Exception"),
    ("LookupError", "Exception"),
    ("IndexError", "LookupError"),
    ("KeyError", "LookupError"),
    ("NameError", "Exception"),
    ("UnboundLocalError", "NameError"),
    ("RuntimeError", "Exception"),
    ("RecursionError", "RuntimeError"),
    ("NotImplementedError", "RuntimeError"),
    ("StopIteration", "Exception"),
    ("TypeError", "Exception"),
    ("ValueError", "Exception"),
    ("MemoryError", "Exception"),
    ("ImportError", "Exception"),
    ("ModuleNotFoundError", "ImportError"),
];

pub fn is_exception_type(name: &str) -> bool {
    EXCEPTION_TYPES.iter().any(|(n, _)| *n == name)
}

pub fn exception_matches(kind: &str, handler: &str) -> bool {
    let mut current = kind;
    loop {
        if current == handler {
            return true;
        }
        match EXCEPTION_TYPES.iter().find(|(n, _)| *n == current) {
            Some((_, parent)) if !parent.is_empty() => current = parent,
            _ => return false,
        }
    }
}

// ---- objects ----

#[derive(Debug)]
pub struct StrObj {
    pub text: String,
    _charge: Charge,
}

impl StrObj {
    pub fn chars_len(&self) -> usize {
        if self.text.is_ascii() {
            self.text.len()
        } else {
            self.text.chars().count()
        }
    }
}

#[derive(Debug)]
pub struct ListObj {
    pub items: RefCell<Vec<Value>>,
    charge: Charge,
}

impl ListObj {
    /// Re-synchronises the charged size after a mutation.
    pub fn sync(&self) -> PyResult<()> {
        let len = self.items.borrow().len();
        self.charge.resize(OBJECT_OVERHEAD + len * SLOT)
    }
}

#[derive(Debug)]
pub struct TupleObj {
    pub items: Vec<Value>,
    _charge: Charge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictKind {
    Plain,
    /// `collections.defaultdict`
    Default,
    /// `collections.Counter`
    Counter,
}

#[derive(Debug)]
pub struct DictObj {
    pub map: RefCell<IndexMap<HashKey, (Value, Value)>>,
    pub kind: DictKind,
    pub default_factory: Option<Value>,
    charge: Charge,
}

impl DictObj {
    pub fn sync(&self) -> PyResult<()> {
        let len = self.map.borrow().len();
        self.charge.resize(OBJECT_OVERHEAD + len * (2 * SLOT + 24))
    }

    pub fn get(&self, key: &HashKey) -> Option<Value> {
        self.map.borrow().get(key).map(|(_, v)| v.clone())
    }

    pub fn insert(&self, key: Value, value: Value) -> PyResult<()> {
        let hk = key.hash_key()?;
        self.map.borrow_mut().insert(hk, (key, value));
        self.sync()
    }
}

#[derive(Debug)]
pub struct SetObj {
    pub map: RefCell<IndexMap<HashKey, Value>>,
    charge: Charge,
}

impl SetObj {
    pub fn sync(&self) -> PyResult<()> {
        let len = self.map.borrow().len();
        self.charge.resize(OBJECT_OVERHEAD + len * (SLOT + 24))
    }

    pub fn contains(&self, key: &HashKey) -> bool {
        self.map.borrow().contains_key(key)
    }
}

/// Lexical scope of a running function, or the module scope when `locals` is
/// `None`.
#[derive(Debug)]
pub struct Scope {
    pub vars: RefCell<HashMap<String, Value>>,
    pub locals: Option<Rc<HashSet<String>>>,
    pub parent: Option<Rc<Scope>>,
    /// Set once a closure captured this scope, so teardown can break cycles.
    pub captured: Cell<bool>,
}

impl Scope {
    pub fn new(locals: Option<Rc<HashSet<String>>>, parent: Option<Rc<Scope>>) -> Rc<Self> {
        Rc::new(Self { vars: RefCell::new(HashMap::new()), locals, parent, captured: Cell::new(false) })
    }

    pub fn is_local(&self, name: &str) -> bool {
        self.locals.as_ref().is_some_and(|l| l.contains(name))
    }
}

#[derive(Debug)]
pub struct Function {
    pub def: Rc<FuncDef>,
    pub locals: Rc<HashSet<String>>,
    pub defaults: Vec<Value>,
    pub kw_defaults: Vec<Option<Value>>,
    pub closure: Option<Rc<Scope>>,
}

#[derive(Debug)]
pub struct MethodObj {
    pub receiver: Value,
    pub name: Rc<str>,
}

/// Memoising wrapper produced by `functools.cache` / `lru_cache`.
#[derive(Debug)]
pub struct CachedObj {
    pub func: Value,
    pub memo: RefCell<HashMap<HashKey, Value>>,
}

/// Partial application of `functools.lru_cache(maxsize)` or similar
/// decorator factories: calling it with a function yields the wrapper.
#[derive(Debug)]
pub struct PartialObj {
    pub func: Value,
    pub args: Vec<Value>,
    pub kwargs: Vec<(String, Value)>,
}

#[derive(Debug)]
pub enum IterState {
    Seq(VecDeque<Value>),
    Range { next: i64, stop: i64, step: i64 },
}

#[derive(Debug)]
pub struct IterObj {
    pub state: RefCell<IterState>,
    _charge: Charge,
}

impl IterObj {
    pub fn next(&self) -> Option<Value> {
        match &mut *self.state.borrow_mut() {
            IterState::Seq(items) => items.pop_front(),
            IterState::Range { next, stop, step } => {
                let more = if *step > 0 { *next < *stop } else { *next > *stop };
                if !more {
                    return None;
                }
                let value = *next;
                *next = next.saturating_add(*step);
                Some(Value::Int(value))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<StrObj>),
    List(Rc<ListObj>),
    Tuple(Rc<TupleObj>),
    Dict(Rc<DictObj>),
    Set(Rc<SetObj>),
    Range(i64, i64, i64),
    Slice(Box<(Value, Value, Value)>),
    Iter(Rc<IterObj>),
    Func(Rc<Function>),
    /// Builtin function, type or exception class, by name.
    Builtin(Rc<str>),
    Method(Rc<MethodObj>),
    Cached(Rc<CachedObj>),
    Partial(Rc<PartialObj>),
    Module(Rc<str>),
    Exception(Rc<ExcObj>),
    Ellipsis,
}

/// Hashable projection of a value. Numbers that compare equal hash equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HashKey {
    None,
    Int(i64),
    Float(u64),
    Str(Rc<str>),
    Tuple(Vec<HashKey>),
    Identity(usize),
}

impl Value {
    pub fn str_unchecked(text: impl Into<String>) -> Value {
        Value::Str(Rc::new(StrObj { text: text.into(), _charge: Charge::default() }))
    }

    pub fn str(text: impl Into<String>) -> PyResult {
        let text = text.into();
        let charge = Charge::default();
        charge.resize(OBJECT_OVERHEAD + text.len())?;
        Ok(Value::Str(Rc::new(StrObj { text, _charge: charge })))
    }

    pub fn list(items: Vec<Value>) -> PyResult {
        let obj = ListObj { items: RefCell::new(items), charge: Charge::default() };
        obj.sync()?;
        Ok(Value::List(Rc::new(obj)))
    }

    pub fn tuple_unchecked(items: Vec<Value>) -> Value {
        Value::Tuple(Rc::new(TupleObj { items, _charge: Charge::default() }))
    }

    pub fn tuple(items: Vec<Value>) -> PyResult {
        let charge = Charge::default();
        charge.resize(OBJECT_OVERHEAD + items.len() * SLOT)?;
        Ok(Value::Tuple(Rc::new(TupleObj { items, _charge: charge })))
    }

    pub fn dict_of(kind: DictKind, default_factory: Option<Value>, entries: Vec<(Value, Value)>) -> PyResult {
        let mut map = IndexMap::with_capacity(entries.len());
        for (k, v) in entries {
            map.insert(k.hash_key()?, (k, v));
        }
        let obj = DictObj { map: RefCell::new(map), kind, default_factory, charge: Charge::default() };
        obj.sync()?;
        Ok(Value::Dict(Rc::new(obj)))
    }

    pub fn dict(entries: Vec<(Value, Value)>) -> PyResult {
        Self::dict_of(DictKind::Plain, None, entries)
    }

    pub fn set(items: Vec<Value>) -> PyResult {
        let mut map = IndexMap::with_capacity(items.len());
        for item in items {
            map.entry(item.hash_key()?).or_insert(item);
        }
        let obj = SetObj { map: RefCell::new(map), charge: Charge::default() };
        obj.sync()?;
        Ok(Value::Set(Rc::new(obj)))
    }

    pub fn iter_of(items: impl Into<VecDeque<Value>>) -> PyResult {
        let items = items.into();
        let charge = Charge::default();
        charge.resize(OBJECT_OVERHEAD + items.len() * SLOT)?;
        Ok(Value::Iter(Rc::new(IterObj { state: RefCell::new(IterState::Seq(items)), _charge: charge })))
    }

    pub fn range_iter(next: i64, stop: i64, step: i64) -> Value {
        Value::Iter(Rc::new(IterObj {
            state: RefCell::new(IterState::Range { next, stop, step }),
            _charge: Charge::default(),
        }))
    }

    pub fn builtin(name: &str) -> Value {
        Value::Builtin(name.into())
    }

    pub fn type_name(&self) -> &str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Dict(d) => match d.kind {
                DictKind::Plain => "dict",
                DictKind::Default => "defaultdict",
                DictKind::Counter => "Counter",
            },
            Value::Set(_) => "set",
            Value::Range(..) => "range",
            Value::Slice(_) => "slice",
            Value::Iter(_) => "iterator",
            Value::Func(_) | Value::Cached(_) | Value::Partial(_) => "function",
            Value::Builtin(_) => "builtin_function_or_method",
            Value::Method(_) => "method",
            Value::Module(_) => "module",
            Value::Exception(e) => {
                let _ = e;
                "exception"
            }
            Value::Ellipsis => "ellipsis",
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(v) => *v != 0,
            Value::Float(v) => *v != 0.0,
            Value::Str(s) => !s.text.is_empty(),
            Value::List(l) => !l.items.borrow().is_empty(),
            Value::Tuple(t) => !t.items.is_empty(),
            Value::Dict(d) => !d.map.borrow().is_empty(),
            Value::Set(s) => !s.map.borrow().is_empty(),
            Value::Range(start, stop, step) => range_len(*start, *stop, *step) > 0,
            _ => true,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Bool(b) => Some(i64::from(*b)),
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Bool(b) => Some(f64::from(u8::from(*b))),
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(&s.text),
            _ => None,
        }
    }

    pub fn hash_key(&self) -> PyResult<HashKey> {
        Ok(match self {
            Value::None => HashKey::None,
            Value::Bool(b) => HashKey::Int(i64::from(*b)),
            Value::Int(v) => HashKey::Int(*v),
            Value::Float(v) => {
                if v.fract() == 0.0 && v.abs() < 9.2e18 {
                    HashKey::Int(*v as i64)
                } else {
                    HashKey::Float(v.to_bits())
                }
            }
            Value::Str(s) => HashKey::Str(s.text.as_str().into()),
            Value::Tuple(t) => HashKey::Tuple(t.items.iter().map(Value::hash_key).collect::<PyResult<_>>()?),
            Value::Range(a, b, c) => HashKey::Tuple(vec![HashKey::Int(*a), HashKey::Int(*b), HashKey::Int(*c)]),
            Value::List(_) | Value::Dict(_) | Value::Set(_) | Value::Slice(_) => {
                return Err(type_error(format!("unhashable type: '{}'", self.type_name())))
            }
            Value::Builtin(name) | Value::Module(name) => HashKey::Str(format!("<{name}>").into()),
            other => HashKey::Identity(other.identity()),
        })
    }

    /// Address used for identity comparisons of reference values.
    pub fn identity(&self) -> usize {
        match self {
            Value::Str(r) => Rc::as_ptr(r) as usize,
            Value::List(r) => Rc::as_ptr(r) as usize,
            Value::Tuple(r) => Rc::as_ptr(r) as usize,
            Value::Dict(r) => Rc::as_ptr(r) as usize,
            Value::Set(r) => Rc::as_ptr(r) as usize,
            Value::Iter(r) => Rc::as_ptr(r) as usize,
            Value::Func(r) => Rc::as_ptr(r) as usize,
            Value::Method(r) => Rc::as_ptr(r) as usize,
            Value::Cached(r) => Rc::as_ptr(r) as usize,
            Value::Partial(r) => Rc::as_ptr(r) as usize,
            Value::Exception(r) => Rc::as_ptr(r) as usize,
            Value::Builtin(r) | Value::Module(r) => Rc::as_ptr(r) as *const u8 as usize,
            _ => 0,
        }
    }

    pub fn is(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::None, Value::None) | (Value::Ellipsis, Value::Ellipsis) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Builtin(a), Value::Builtin(b)) | (Value::Module(a), Value::Module(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => Rc::ptr_eq(a, b) || a.text == b.text,
            (a, b) => {
                let (x, y) = (a.identity(), b.identity());
                x != 0 && x == y
            }
        }
    }

    pub fn py_eq(&self, other: &Value) -> bool {
        if let (Some(a), Some(b)) = (self.as_int(), other.as_int()) {
            return a == b;
        }
        if let (Some(a), Some(b)) = (self.as_f64(), other.as_f64()) {
            return a == b;
        }
        match (self, other) {
            (Value::None, Value::None) | (Value::Ellipsis, Value::Ellipsis) => true,
            (Value::Str(a), Value::Str(b)) => a.text == b.text,
            (Value::List(a), Value::List(b)) => {
                Rc::ptr_eq(a, b) || seq_eq(&a.items.borrow(), &b.items.borrow())
            }
            (Value::Tuple(a), Value::Tuple(b)) => seq_eq(&a.items, &b.items),
            (Value::Dict(a), Value::Dict(b)) => {
                let (a, b) = (a.map.borrow(), b.map.borrow());
                a.len() == b.len()
                    && a.iter().all(|(k, (_, v))| b.get(k).is_some_and(|(_, w)| v.py_eq(w)))
            }
            (Value::Set(a), Value::Set(b)) => {
                let (a, b) = (a.map.borrow(), b.map.borrow());
                a.len() == b.len() && a.keys().all(|k| b.contains_key(k))
            }
            (Value::Range(a, b, c), Value::Range(x, y, z)) => {
                let (n, m) = (range_len(*a, *b, *c), range_len(*x, *y, *z));
                n == m && (n == 0 || (a == x && (n == 1 || c == z)))
            }
            (a, b) => a.is(b),
        }
    }

    /// `<` / `>` ordering; `TypeError` for unorderable pairs.
    pub fn py_cmp(&self, other: &Value) -> PyResult<Ordering> {
        if let (Some(a), Some(b)) = (self.as_int(), other.as_int()) {
            return Ok(a.cmp(&b));
        }
        if let (Some(a), Some(b)) = (self.as_f64(), other.as_f64()) {
            // NaN compares false both ways; map it to Equal so sorts still terminate
            return Ok(a.partial_cmp(&b).unwrap_or(Ordering::Equal));
        }
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => Ok(a.text.cmp(&b.text)),
            (Value::List(a), Value::List(b)) => seq_cmp(&a.items.borrow().clone(), &b.items.borrow().clone()),
            (Value::Tuple(a), Value::Tuple(b)) => seq_cmp(&a.items, &b.items),
            (Value::Set(a), Value::Set(b)) => {
                // subset ordering; only meaningful for <=/>= callers
                let (a, b) = (a.map.borrow(), b.map.borrow());
                Ok(if a.len() == b.len() && a.keys().all(|k| b.contains_key(k)) {
                    Ordering::Equal
                } else if a.keys().all(|k| b.contains_key(k)) {
                    Ordering::Less
                } else if b.keys().all(|k| a.contains_key(k)) {
                    Ordering::Greater
                } else {
                    return Err(type_error("sets are not totally ordered"));
                })
            }
            _ => Err(type_error(format!(
                "'<' not supported between instances of '{}' and '{}'",
                self.type_name(),
                other.type_name()
            ))),
        }
    }

    pub fn repr(&self) -> String {
        let mut out = String::new();
        self.repr_into(&mut out, 0);
        out
    }

    fn repr_into(&self, out: &mut String, depth: usize) {
        if depth > 64 {
            out.push_str("...");
            return;
        }
        match self {
            Value::None => out.push_str("None"),
            Value::Bool(true) => out.push_str("True"),
            Value::Bool(false) => out.push_str("False"),
            Value::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Value::Float(v) => out.push_str(&render_float(*v)),
            Value::Str(s) => out.push_str(&render_str(&s.text)),
            Value::List(l) => {
                out.push('[');
                repr_seq(&l.items.borrow(), out, depth);
                out.push(']');
            }
            Value::Tuple(t) => {
                out.push('(');
                repr_seq(&t.items, out, depth);
                if t.items.len() == 1 {
                    out.push(',');
                }
                out.push(')');
            }
            Value::Dict(d) => {
                out.push('{');
                for (i, (k, v)) in d.map.borrow().values().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    k.repr_into(out, depth + 1);
                    out.push_str(": ");
                    v.repr_into(out, depth + 1);
                }
                out.push('}');
            }
            Value::Set(s) => {
                let items: Vec<Value> = s.map.borrow().values().cloned().collect();
                if items.is_empty() {
                    out.push_str("set()");
                } else {
                    out.push('{');
                    repr_seq(&items, out, depth);
                    out.push('}');
                }
            }
            Value::Range(a, b, c) => {
                if *c == 1 {
                    let _ = write!(out, "range({a}, {b})");
                } else {
                    let _ = write!(out, "range({a}, {b}, {c})");
                }
            }
            Value::Slice(parts) => {
                let _ = write!(out, "slice({}, {}, {})", parts.0.repr(), parts.1.repr(), parts.2.repr());
            }
            Value::Iter(_) => out.push_str("<iterator object>"),
            Value::Func(f) => {
                let _ = write!(out, "<function {}>", f.def.name);
            }
            Value::Cached(c) => c.func.repr_into(out, depth + 1),
            Value::Partial(p) => {
                out.push_str("functools.partial(");
                p.func.repr_into(out, depth + 1);
                out.push(')');
            }
            Value::Builtin(name) => {
                if is_exception_type(name) || super::builtins::is_type_name(name) {
                    let _ = write!(out, "<class '{name}'>");
                } else {
                    let _ = write!(out, "<built-in function {name}>");
                }
            }
            Value::Method(m) => {
                let _ = write!(out, "<built-in method {} of {} object>", m.name, m.receiver.type_name());
            }
            Value::Module(name) => {
                let _ = write!(out, "<module '{name}'>");
            }
            Value::Exception(e) => {
                let _ = write!(out, "{}(", e.kind);
                repr_seq(&e.args, out, depth);
                out.push(')');
            }
            Value::Ellipsis => out.push_str("Ellipsis"),
        }
    }

    /// `str(value)`.
    pub fn to_str(&self) -> String {
        match self {
            Value::Str(s) => s.text.clone(),
            Value::Exception(e) => e.message(),
            other => other.repr(),
        }
    }

    pub fn from_literal(lit: &Literal) -> PyResult {
        Ok(match lit {
            Literal::None => Value::None,
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(v) => Value::Int(*v),
            Literal::Float(v) => Value::Float(*v),
            Literal::Str(s) => Value::str(s.clone())?,
            Literal::List(items) => Value::list(items.iter().map(Value::from_literal).collect::<PyResult<_>>()?)?,
            Literal::Tuple(items) => {
                Value::tuple(items.iter().map(Value::from_literal).collect::<PyResult<_>>()?)?
            }
            Literal::Dict(entries) => Value::dict(
                entries
                    .iter()
                    .map(|(k, v)| Ok((Value::from_literal(k)?, Value::from_literal(v)?)))
                    .collect::<PyResult<_>>()?,
            )?,
        })
    }

    /// Literal projection of a result value; `None` when the value (or a
    /// part of it) has no literal form.
    pub fn to_literal(&self) -> Option<Literal> {
        Some(match self {
            Value::None => Literal::None,
            Value::Bool(b) => Literal::Bool(*b),
            Value::Int(v) => Literal::Int(*v),
            Value::Float(v) => Literal::Float(*v),
            Value::Str(s) => Literal::Str(s.text.clone()),
            Value::List(l) => Literal::List(l.items.borrow().iter().map(Value::to_literal).collect::<Option<_>>()?),
            Value::Tuple(t) => Literal::Tuple(t.items.iter().map(Value::to_literal).collect::<Option<_>>()?),
            Value::Dict(d) => Literal::Dict(
                d.map
                    .borrow()
                    .values()
                    .map(|(k, v)| Some((k.to_literal()?, v.to_literal()?)))
                    .collect::<Option<_>>()?,
            ),
            _ => return None,
        })
    }
}

fn repr_seq(items: &[Value], out: &mut String, depth: usize) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        item.repr_into(out, depth + 1);
    }
}

fn seq_eq(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.py_eq(y))
}

fn seq_cmp(a: &[Value], b: &[Value]) -> PyResult<Ordering> {
    for (x, y) in a.iter().zip(b) {
        if !x.py_eq(y) {
            return x.py_cmp(y);
        }
    }
    Ok(a.len().cmp(&b.len()))
}

pub fn range_len(start: i64, stop: i64, step: i64) -> i64 {
    let (start, stop, step) = (i128::from(start), i128::from(stop), i128::from(step));
    let n = if step > 0 && start < stop {
        (stop - start + step - 1) / step
    } else if step < 0 && start > stop {
        (start - stop - step - 1) / -step
    } else {
        0
    };
    n.min(i128::from(i64::MAX)) as i64
}
