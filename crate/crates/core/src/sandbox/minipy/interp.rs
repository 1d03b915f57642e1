//! Tree-walking evaluator.

use std::collections::HashSet;
use std::rc::{Rc, Weak};
use std::time::Instant;

use super::ast::*;
use super::builtins;
use super::value::*;

/// Positional and keyword arguments of one call.
type CallArgs = (Vec<Value>, Vec<(String, Value)>);

pub const RECURSION_LIMIT: usize = 1000;
const DEADLINE_CHECK_INTERVAL: u64 = 4096;

pub struct Interp {
    pub globals: Rc<Scope>,
    fuel: Option<u64>,
    steps: u64,
    deadline: Option<Instant>,
    depth: usize,
    pub recursion_limit: usize,
    captured: Vec<Weak<Scope>>,
    /// Values yielded by the generator bodies currently running.
    yields: Vec<Vec<Value>>,
    /// Exceptions being handled, innermost last (for bare `raise`).
    handling: Vec<Rc<ExcObj>>,
}

/// A materialised iteration source.
pub enum Source {
    Items(std::vec::IntoIter<Value>),
    Range { next: i64, stop: i64, step: i64 },
    Iter(Rc<IterObj>),
}

impl Source {
    pub fn next(&mut self, interp: &mut Interp) -> PyResult<Option<Value>> {
        interp.tick()?;
        Ok(match self {
            Source::Items(items) => items.next(),
            Source::Range { next, stop, step } => {
                let more = if *step > 0 { *next < *stop } else { *next > *stop };
                if !more {
                    return Ok(None);
                }
                let value = *next;
                *next = next.saturating_add(*step);
                Some(Value::Int(value))
            }
            Source::Iter(it) => it.next(),
        })
    }
}

impl Drop for Interp {
    fn drop(&mut self) {
        // closures capture the scope that holds them; break those cycles
        for scope in self.captured.drain(..) {
            if let Some(scope) = scope.upgrade() {
                scope.vars.borrow_mut().clear();
            }
        }
        let globals = std::mem::take(&mut *self.globals.vars.borrow_mut());
        drop(globals);
    }
}

impl Interp {
    pub fn new(fuel: Option<u64>, deadline: Option<Instant>) -> Self {
        Self {
            globals: Scope::new(None, None),
            fuel,
            steps: 0,
            deadline,
            depth: 0,
            recursion_limit: RECURSION_LIMIT,
            captured: Vec::new(),
            yields: Vec::new(),
            handling: Vec::new(),
        }
    }

    pub fn tick(&mut self) -> PyResult<()> {
        self.steps += 1;
        if let Some(fuel) = self.fuel {
            if self.steps > fuel {
                return Err(Flow::Timeout);
            }
        }
        if self.steps.is_multiple_of(DEADLINE_CHECK_INTERVAL) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    return Err(Flow::Timeout);
                }
            }
        }
        Ok(())
    }

    pub fn run_module(&mut self, body: &[Stmt]) -> PyResult<()> {
        let globals = self.globals.clone();
        match self.exec_block(body, &globals) {
            Ok(()) => Ok(()),
            Err(Flow::Return(_)) => Err(exc("SyntaxError", "'return' outside function")),
            Err(Flow::Break | Flow::Continue) => Err(exc("SyntaxError", "'break' outside loop")),
            Err(other) => Err(other),
        }
    }

    // ---- names ----

    pub fn lookup(&self, name: &str, scope: &Rc<Scope>) -> PyResult {
        let mut current = scope;
        loop {
            if let Some(v) = current.vars.borrow().get(name) {
                return Ok(v.clone());
            }
            if current.is_local(name) {
                return Err(if Rc::ptr_eq(current, scope) {
                    exc("UnboundLocalError", format!("local variable '{name}' referenced before assignment"))
                } else {
                    exc("NameError", format!("free variable '{name}' referenced before assignment"))
                });
            }
            match &current.parent {
                Some(parent) => current = parent,
                None => break,
            }
        }
        if let Some(v) = self.globals.vars.borrow().get(name) {
            return Ok(v.clone());
        }
        builtins::lookup_builtin(name).ok_or_else(|| exc("NameError", format!("name '{name}' is not defined")))
    }

    fn binding_scope(&self, name: &str, scope: &Rc<Scope>) -> Rc<Scope> {
        if scope.locals.is_none() || scope.is_local(name) {
            return scope.clone();
        }
        let mut current = scope.parent.as_ref();
        while let Some(s) = current {
            if s.is_local(name) {
                return s.clone();
            }
            current = s.parent.as_ref();
        }
        self.globals.clone()
    }

    pub fn assign_name(&self, name: &str, value: Value, scope: &Rc<Scope>) {
        self.binding_scope(name, scope).vars.borrow_mut().insert(name.to_string(), value);
    }

    fn assign(&mut self, target: &Expr, value: Value, scope: &Rc<Scope>) -> PyResult<()> {
        match target {
            Expr::Name(name) => {
                self.assign_name(name, value, scope);
                Ok(())
            }
            Expr::Subscript(obj, index) => {
                let obj = self.eval(obj, scope)?;
                let index = self.eval(index, scope)?;
                builtins::set_item(self, &obj, index, value)
            }
            Expr::Attr(_, attr) => Err(exc("AttributeError", format!("cannot set attribute '{attr}'"))),
            Expr::Tuple(targets) | Expr::List(targets) => {
                let items = self.collect(&value)?;
                let star = targets.iter().position(|t| matches!(t, Expr::Starred(_)));
                match star {
                    None => {
                        if items.len() != targets.len() {
                            return Err(value_error(if items.len() > targets.len() {
                                format!("too many values to unpack (expected {})", targets.len())
                            } else {
                                format!("not enough values to unpack (expected {}, got {})", targets.len(), items.len())
                            }));
                        }
                        for (t, v) in targets.iter().zip(items) {
                            self.assign(t, v, scope)?;
                        }
                    }
                    Some(i) => {
                        let after = targets.len() - i - 1;
                        if items.len() < targets.len() - 1 {
                            return Err(value_error(format!(
                                "not enough values to unpack (expected at least {}, got {})",
                                targets.len() - 1,
                                items.len()
                            )));
                        }
                        let mut items = items;
                        let tail = items.split_off(items.len() - after);
                        let middle = items.split_off(i);
                        for (t, v) in targets[..i].iter().zip(items) {
                            self.assign(t, v, scope)?;
                        }
                        let Expr::Starred(inner) = &targets[i] else { unreachable!() };
                        self.assign(inner, Value::list(middle)?, scope)?;
                        for (t, v) in targets[i + 1..].iter().zip(tail) {
                            self.assign(t, v, scope)?;
                        }
                    }
                }
                Ok(())
            }
            _ => Err(exc("SyntaxError", "cannot assign to expression")),
        }
    }

    // ---- iteration ----

    pub fn source(&mut self, value: &Value) -> PyResult<Source> {
        Ok(match value {
            Value::Range(start, stop, step) => Source::Range { next: *start, stop: *stop, step: *step },
            Value::Iter(it) => Source::Iter(it.clone()),
            Value::List(l) => Source::Items(l.items.borrow().clone().into_iter()),
            Value::Tuple(t) => Source::Items(t.items.clone().into_iter()),
            Value::Str(s) => {
                let chars = s.text.chars().map(|c| Value::str(c.to_string())).collect::<PyResult<Vec<_>>>()?;
                Source::Items(chars.into_iter())
            }
            Value::Dict(d) => Source::Items(d.map.borrow().values().map(|(k, _)| k.clone()).collect::<Vec<_>>().into_iter()),
            Value::Set(s) => Source::Items(s.map.borrow().values().cloned().collect::<Vec<_>>().into_iter()),
            other => return Err(type_error(format!("'{}' object is not iterable", other.type_name()))),
        })
    }

    /// Drains an iterable into a vector, charging heap as it grows.
    pub fn collect(&mut self, value: &Value) -> PyResult<Vec<Value>> {
        match value {
            Value::List(l) => return Ok(l.items.borrow().clone()),
            Value::Tuple(t) => return Ok(t.items.clone()),
            _ => {}
        }
        let mut source = self.source(value)?;
        let mut out = Vec::new();
        while let Some(v) = source.next(self)? {
            check_growth(out.len())?;
            out.push(v);
        }
        Ok(out)
    }

    // ---- statements ----

    pub fn exec_block(&mut self, body: &[Stmt], scope: &Rc<Scope>) -> PyResult<()> {
        for stmt in body {
            self.exec(stmt, scope)?;
        }
        Ok(())
    }

    fn exec(&mut self, stmt: &Stmt, scope: &Rc<Scope>) -> PyResult<()> {
        self.tick()?;
        match &stmt.kind {
            StmtKind::Expr(e) => {
                self.eval(e, scope)?;
            }
            StmtKind::Assign(targets, value) => {
                let value = self.eval(value, scope)?;
                for target in targets {
                    self.assign(target, value.clone(), scope)?;
                }
            }
            StmtKind::AugAssign(target, op, value) => self.aug_assign(target, *op, value, scope)?,
            StmtKind::AnnAssign(target, value) => {
                if let Some(value) = value {
                    let value = self.eval(value, scope)?;
                    self.assign(target, value, scope)?;
                }
            }
            StmtKind::Return(value) => {
                let value = match value {
                    Some(e) => self.eval(e, scope)?,
                    None => Value::None,
                };
                return Err(Flow::Return(value));
            }
            StmtKind::If(cond, body, orelse) => {
                if self.eval(cond, scope)?.truthy() {
                    self.exec_block(body, scope)?;
                } else {
                    self.exec_block(orelse, scope)?;
                }
            }
            StmtKind::While(cond, body, orelse) => {
                loop {
                    if !self.eval(cond, scope)?.truthy() {
                        self.exec_block(orelse, scope)?;
                        break;
                    }
                    match self.exec_block(body, scope) {
                        Ok(()) | Err(Flow::Continue) => {}
                        Err(Flow::Break) => break,
                        Err(other) => return Err(other),
                    }
                }
            }
            StmtKind::For(target, iter, body, orelse) => {
                let iterable = self.eval(iter, scope)?;
                let mut source = self.source(&iterable)?;
                let mut broke = false;
                while let Some(item) = source.next(self)? {
                    self.assign(target, item, scope)?;
                    match self.exec_block(body, scope) {
                        Ok(()) | Err(Flow::Continue) => {}
                        Err(Flow::Break) => {
                            broke = true;
                            break;
                        }
                        Err(other) => return Err(other),
                    }
                }
                if !broke {
                    self.exec_block(orelse, scope)?;
                }
            }
            StmtKind::Break => return Err(Flow::Break),
            StmtKind::Continue => return Err(Flow::Continue),
            StmtKind::Pass | StmtKind::Global(_) | StmtKind::Nonlocal(_) => {}
            StmtKind::Def(def) => {
                let func = self.make_function(def, scope)?;
                self.assign_name(&def.name, func, scope);
            }
            StmtKind::Raise(value) => {
                let Some(value) = value else {
                    return Err(match self.handling.last() {
                        Some(e) => Flow::Exc(e.clone()),
                        None => exc("RuntimeError", "No active exception to reraise"),
                    });
                };
                let value = self.eval(value, scope)?;
                return Err(self.raise_value(value)?);
            }
            StmtKind::Assert(test, msg) => {
                if !self.eval(test, scope)?.truthy() {
                    let args = match msg {
                        Some(m) => vec![self.eval(m, scope)?],
                        None => Vec::new(),
                    };
                    return Err(Flow::Exc(Rc::new(ExcObj { kind: "AssertionError".into(), args })));
                }
            }
            StmtKind::Import(names) => {
                for (module, alias) in names {
                    let top = module.split('.').next().unwrap_or(module);
                    let value = builtins::import_module(if alias.is_some() { module } else { top })?;
                    self.assign_name(alias.as_deref().unwrap_or(top), value, scope);
                }
            }
            StmtKind::ImportFrom(module, names) => {
                let module_value = builtins::import_module(module)?;
                for (name, alias) in names {
                    if name == "*" {
                        for (attr, value) in builtins::module_exports(module) {
                            self.assign_name(attr, value, scope);
                        }
                        continue;
                    }
                    let value = builtins::get_attr(self, &module_value, name).map_err(|_| {
                        exc("ImportError", format!("cannot import name '{name}' from '{module}'"))
                    })?;
                    self.assign_name(alias.as_deref().unwrap_or(name), value, scope);
                }
            }
            StmtKind::Try { body, handlers, orelse, finally } => {
                let outcome = self.exec_try(body, handlers, orelse, scope);
                if !finally.is_empty() {
                    if matches!(outcome, Err(Flow::Timeout | Flow::Memory)) {
                        return outcome;
                    }
                    self.exec_block(finally, scope)?;
                }
                outcome?;
            }
            StmtKind::Del(targets) => {
                for target in targets {
                    self.delete(target, scope)?;
                }
            }
            StmtKind::Yield(value) => {
                let values = match value {
                    Some(Expr::Starred(source)) => {
                        let source = self.eval(source, scope)?;
                        self.collect(&source)?
                    }
                    Some(e) => vec![self.eval(e, scope)?],
                    None => vec![Value::None],
                };
                let Some(sink) = self.yields.last_mut() else {
                    return Err(exc("SyntaxError", "'yield' outside function"));
                };
                check_growth(sink.len() + values.len())?;
                sink.extend(values);
            }
        }
        Ok(())
    }

    fn exec_try(
        &mut self,
        body: &[Stmt],
        handlers: &[Handler],
        orelse: &[Stmt],
        scope: &Rc<Scope>,
    ) -> PyResult<()> {
        let error = match self.exec_block(body, scope) {
            Ok(()) => return self.exec_block(orelse, scope),
            Err(Flow::Exc(e)) => e,
            Err(other) => return Err(other),
        };
        for handler in handlers {
            let matched = match &handler.kind {
                None => true,
                Some(kind) => {
                    let kind = self.eval(kind, scope)?;
                    self.handler_matches(&kind, &error.kind)?
                }
            };
            if !matched {
                continue;
            }
            if let Some(name) = &handler.name {
                self.assign_name(name, Value::Exception(error.clone()), scope);
            }
            self.handling.push(error.clone());
            let result = self.exec_block(&handler.body, scope);
            self.handling.pop();
            return result;
        }
        Err(Flow::Exc(error))
    }

    fn handler_matches(&self, kind: &Value, raised: &str) -> PyResult<bool> {
        match kind {
            Value::Builtin(name) if is_exception_type(name) => Ok(exception_matches(raised, name)),
            Value::Tuple(t) => {
                for k in &t.items {
                    if self.handler_matches(k, raised)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            _ => Err(type_error("catching classes that do not inherit from BaseException is not allowed")),
        }
    }

    fn raise_value(&mut self, value: Value) -> PyResult<Flow> {
        match value {
            Value::Exception(e) => Ok(Flow::Exc(e)),
            Value::Builtin(name) if is_exception_type(&name) => {
                Ok(Flow::Exc(Rc::new(ExcObj { kind: name, args: Vec::new() })))
            }
            _ => Err(type_error("exceptions must derive from BaseException")),
        }
    }

    fn delete(&mut self, target: &Expr, scope: &Rc<Scope>) -> PyResult<()> {
        match target {
            Expr::Name(name) => {
                let removed = self.binding_scope(name, scope).vars.borrow_mut().remove(name);
                if removed.is_none() {
                    return Err(exc("NameError", format!("name '{name}' is not defined")));
                }
                Ok(())
            }
            Expr::Subscript(obj, index) => {
                let obj = self.eval(obj, scope)?;
                let index = self.eval(index, scope)?;
                builtins::del_item(&obj, &index)
            }
            Expr::Tuple(items) | Expr::List(items) => items.iter().try_for_each(|t| self.delete(t, scope)),
            _ => Err(exc("SyntaxError", "cannot delete expression")),
        }
    }

    fn aug_assign(&mut self, target: &Expr, op: BinOp, value: &Expr, scope: &Rc<Scope>) -> PyResult<()> {
        match target {
            Expr::Name(name) => {
                let current = self.lookup(name, scope)?;
                let rhs = self.eval(value, scope)?;
                let result = self.inplace(current, op, rhs)?;
                self.assign_name(name, result, scope);
                Ok(())
            }
            Expr::Subscript(obj, index) => {
                let obj = self.eval(obj, scope)?;
                let index = self.eval(index, scope)?;
                let current = builtins::get_item(self, &obj, &index)?;
                let rhs = self.eval(value, scope)?;
                let result = self.inplace(current, op, rhs)?;
                builtins::set_item(self, &obj, index, result)
            }
            _ => Err(exc("AttributeError", "augmented assignment to attributes is not supported")),
        }
    }

    /// `+=` and friends: lists, dicts and sets mutate in place.
    fn inplace(&mut self, current: Value, op: BinOp, rhs: Value) -> PyResult {
        match (&current, op) {
            (Value::List(l), BinOp::Add) => {
                let extra = self.collect(&rhs)?;
                l.items.borrow_mut().extend(extra);
                l.sync()?;
                Ok(current)
            }
            (Value::Set(s), BinOp::BitOr | BinOp::BitAnd | BinOp::Sub | BinOp::BitXor) => {
                let result = builtins::binop(self, &current, op, &rhs)?;
                if let Value::Set(r) = &result {
                    *s.map.borrow_mut() = r.map.borrow().clone();
                    s.sync()?;
                }
                Ok(current)
            }
            (Value::Dict(d), BinOp::BitOr) => {
                if let Value::Dict(other) = &rhs {
                    let entries: Vec<_> = other.map.borrow().values().cloned().collect();
                    for (k, v) in entries {
                        d.insert(k, v)?;
                    }
                    return Ok(current);
                }
                builtins::binop(self, &current, op, &rhs)
            }
            _ => builtins::binop(self, &current, op, &rhs),
        }
    }

    fn make_function(&mut self, def: &Rc<FuncDef>, scope: &Rc<Scope>) -> PyResult {
        let defaults = def
            .params
            .iter()
            .filter_map(|p| p.default.as_ref())
            .map(|d| self.eval(d, scope))
            .collect::<PyResult<Vec<_>>>()?;
        let kw_defaults = def
            .kwonly
            .iter()
            .map(|p| p.default.as_ref().map(|d| self.eval(d, scope)).transpose())
            .collect::<PyResult<Vec<_>>>()?;
        let closure = if scope.locals.is_some() {
            if !scope.captured.replace(true) {
                self.captured.push(Rc::downgrade(scope));
            }
            Some(scope.clone())
        } else {
            None
        };
        let locals: HashSet<String> = def.locals.iter().cloned().collect();
        Ok(Value::Func(Rc::new(Function { def: def.clone(), locals: Rc::new(locals), defaults, kw_defaults, closure })))
    }

    // ---- calls ----

    pub fn call(&mut self, callee: &Value, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> PyResult {
        match callee {
            Value::Func(f) => self.call_function(f, args, kwargs),
            Value::Builtin(name) => builtins::call_builtin(self, name, args, kwargs),
            Value::Method(m) => builtins::call_method(self, &m.receiver, &m.name, args, kwargs),
            Value::Cached(c) => {
                if !kwargs.is_empty() {
                    return self.call(&c.func, args, kwargs);
                }
                let key = HashKey::Tuple(args.iter().map(Value::hash_key).collect::<PyResult<_>>()?);
                if let Some(v) = c.memo.borrow().get(&key) {
                    return Ok(v.clone());
                }
                let result = self.call(&c.func, args, kwargs)?;
                charge(64)?;
                c.memo.borrow_mut().insert(key, result.clone());
                Ok(result)
            }
            Value::Partial(p) => {
                let mut all = p.args.clone();
                all.extend(args);
                let mut kw = p.kwargs.clone();
                kw.extend(kwargs);
                self.call(&p.func, all, kw)
            }
            other => Err(type_error(format!("'{}' object is not callable", other.type_name()))),
        }
    }

    fn call_function(&mut self, f: &Rc<Function>, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> PyResult {
        self.tick()?;
        if self.depth >= self.recursion_limit {
            return Err(exc("RecursionError", "maximum recursion depth exceeded"));
        }
        let def = &f.def;
        let scope = Scope::new(Some(f.locals.clone()), f.closure.clone());
        self.bind_arguments(f, args, kwargs, &scope)?;
        self.depth += 1;
        if def.is_generator {
            self.yields.push(Vec::new());
        }
        let outcome = self.exec_block(&def.body, &scope);
        self.depth -= 1;
        let yielded = if def.is_generator { self.yields.pop() } else { None };
        let result = match outcome {
            Ok(()) => Value::None,
            Err(Flow::Return(v)) => v,
            Err(other) => return Err(other),
        };
        match yielded {
            Some(items) => Value::iter_of(items),
            None => Ok(result),
        }
    }

    fn bind_arguments(
        &mut self,
        f: &Function,
        args: Vec<Value>,
        kwargs: Vec<(String, Value)>,
        scope: &Rc<Scope>,
    ) -> PyResult<()> {
        let def = &f.def;
        let name = &def.name;
        let n_params = def.params.len();
        let mut slots: Vec<Option<Value>> = vec![None; n_params];
        let mut extra = Vec::new();
        for (i, arg) in args.into_iter().enumerate() {
            if i < n_params {
                slots[i] = Some(arg);
            } else {
                extra.push(arg);
            }
        }
        if !extra.is_empty() && def.star.is_none() {
            return Err(type_error(format!(
                "{name}() takes {n_params} positional arguments but {} were given",
                n_params + extra.len()
            )));
        }
        let mut kw_slots: Vec<Option<Value>> = vec![None; def.kwonly.len()];
        let mut extra_kw = Vec::new();
        for (key, value) in kwargs {
            if let Some(i) = def.params.iter().position(|p| p.name == key) {
                if slots[i].is_some() {
                    return Err(type_error(format!("{name}() got multiple values for argument '{key}'")));
                }
                slots[i] = Some(value);
            } else if let Some(i) = def.kwonly.iter().position(|p| p.name == key) {
                kw_slots[i] = Some(value);
            } else if def.double_star.is_some() {
                extra_kw.push((Value::str(key)?, value));
            } else {
                return Err(type_error(format!("{name}() got an unexpected keyword argument '{key}'")));
            }
        }
        let first_default = n_params - f.defaults.len();
        let mut vars = scope.vars.borrow_mut();
        for (i, (param, slot)) in def.params.iter().zip(slots).enumerate() {
            let value = match slot {
                Some(v) => v,
                None if i >= first_default => f.defaults[i - first_default].clone(),
                None => {
                    return Err(type_error(format!(
                        "{name}() missing 1 required positional argument: '{}'",
                        param.name
                    )))
                }
            };
            vars.insert(param.name.clone(), value);
        }
        for ((param, slot), default) in def.kwonly.iter().zip(kw_slots).zip(&f.kw_defaults) {
            let value = match slot.or_else(|| default.clone()) {
                Some(v) => v,
                None => {
                    return Err(type_error(format!(
                        "{name}() missing 1 required keyword-only argument: '{}'",
                        param.name
                    )))
                }
            };
            vars.insert(param.name.clone(), value);
        }
        if let Some(star) = &def.star {
            vars.insert(star.clone(), Value::tuple(extra)?);
        }
        if let Some(double_star) = &def.double_star {
            vars.insert(double_star.clone(), Value::dict(extra_kw)?);
        }
        Ok(())
    }

    fn eval_args(&mut self, args: &[Arg], scope: &Rc<Scope>) -> PyResult<CallArgs> {
        let mut positional = Vec::with_capacity(args.len());
        let mut keywords = Vec::new();
        for arg in args {
            match arg {
                Arg::Positional(e) => positional.push(self.eval(e, scope)?),
                Arg::Star(e) => {
                    let v = self.eval(e, scope)?;
                    positional.extend(self.collect(&v)?);
                }
                Arg::Keyword(k, e) => keywords.push((k.clone(), self.eval(e, scope)?)),
                Arg::DoubleStar(e) => match self.eval(e, scope)? {
                    Value::Dict(d) => {
                        for (k, v) in d.map.borrow().values() {
                            let Some(k) = k.as_str() else {
                                return Err(type_error("keywords must be strings"));
                            };
                            keywords.push((k.to_string(), v.clone()));
                        }
                    }
                    _ => return Err(type_error("argument after ** must be a mapping")),
                },
            }
        }
        Ok((positional, keywords))
    }

    // ---- expressions ----

    pub fn eval(&mut self, expr: &Expr, scope: &Rc<Scope>) -> PyResult {
        match expr {
            Expr::Const(c) => Ok(match c {
                Const::None => Value::None,
                Const::Bool(b) => Value::Bool(*b),
                Const::Int(v) => Value::Int(*v),
                Const::Float(v) => Value::Float(*v),
                Const::Str(s) => Value::str(s.to_string())?,
                Const::Ellipsis => Value::Ellipsis,
            }),
            Expr::FStr(parts) => {
                let mut out = String::new();
                for part in parts {
                    match part {
                        FStrPart::Text(t) => out.push_str(t),
                        FStrPart::Expr { expr, spec, conversion } => {
                            let value = self.eval(expr, scope)?;
                            let value = match conversion {
                                Some('r') => Value::str(value.repr())?,
                                Some(_) => Value::str(value.to_str())?,
                                None => value,
                            };
                            out.push_str(&builtins::format_value(&value, spec)?);
                        }
                    }
                }
                Value::str(out)
            }
            Expr::Name(name) => self.lookup(name, scope),
            Expr::Tuple(items) => {
                let items = self.eval_items(items, scope)?;
                Value::tuple(items)
            }
            Expr::List(items) => {
                let items = self.eval_items(items, scope)?;
                Value::list(items)
            }
            Expr::Set(items) => {
                let items = self.eval_items(items, scope)?;
                Value::set(items)
            }
            Expr::Dict(entries) => {
                let mut out = Vec::with_capacity(entries.len());
                for (key, value) in entries {
                    match key {
                        Some(k) => {
                            let k = self.eval(k, scope)?;
                            out.push((k, self.eval(value, scope)?));
                        }
                        None => match self.eval(value, scope)? {
                            Value::Dict(d) => out.extend(d.map.borrow().values().cloned()),
                            other => {
                                return Err(type_error(format!("'{}' object is not a mapping", other.type_name())))
                            }
                        },
                    }
                }
                Value::dict(out)
            }
            Expr::Bin(left, op, right) => {
                let left = self.eval(left, scope)?;
                let right = self.eval(right, scope)?;
                builtins::binop(self, &left, *op, &right)
            }
            Expr::Unary(op, operand) => {
                let value = self.eval(operand, scope)?;
                builtins::unary(*op, &value)
            }
            Expr::And(left, right) => {
                let left = self.eval(left, scope)?;
                if left.truthy() {
                    self.eval(right, scope)
                } else {
                    Ok(left)
                }
            }
            Expr::Or(left, right) => {
                let left = self.eval(left, scope)?;
                if left.truthy() {
                    Ok(left)
                } else {
                    self.eval(right, scope)
                }
            }
            Expr::Compare(first, rest) => {
                let mut left = self.eval(first, scope)?;
                for (op, right) in rest {
                    let right = self.eval(right, scope)?;
                    if !builtins::compare(self, &left, *op, &right)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Ok(Value::Bool(true))
            }
            Expr::Call(func, args) => {
                let callee = self.eval(func, scope)?;
                let (positional, keywords) = self.eval_args(args, scope)?;
                self.call(&callee, positional, keywords)
            }
            Expr::Attr(obj, attr) => {
                let obj = self.eval(obj, scope)?;
                builtins::get_attr(self, &obj, attr)
            }
            Expr::Subscript(obj, index) => {
                let obj = self.eval(obj, scope)?;
                let index = self.eval(index, scope)?;
                builtins::get_item(self, &obj, &index)
            }
            Expr::Slice(lower, upper, step) => {
                let mut part = |e: &Option<Box<Expr>>| -> PyResult {
                    match e {
                        Some(e) => self.eval(e, scope),
                        None => Ok(Value::None),
                    }
                };
                let (lower, upper, step) = (part(lower)?, part(upper)?, part(step)?);
                Ok(Value::Slice(Box::new((lower, upper, step))))
            }
            Expr::IfExp { cond, then, orelse } => {
                if self.eval(cond, scope)?.truthy() {
                    self.eval(then, scope)
                } else {
                    self.eval(orelse, scope)
                }
            }
            Expr::ListComp(elt, gens) => {
                let mut out = Vec::new();
                self.comprehension(gens, scope, &mut |interp, s| {
                    let v = interp.eval(elt, s)?;
                    check_growth(out.len())?;
                    out.push(v);
                    Ok(())
                })?;
                Value::list(out)
            }
            Expr::GenExp(elt, gens) => {
                let mut out = Vec::new();
                self.comprehension(gens, scope, &mut |interp, s| {
                    let v = interp.eval(elt, s)?;
                    check_growth(out.len())?;
                    out.push(v);
                    Ok(())
                })?;
                Value::iter_of(out)
            }
            Expr::SetComp(elt, gens) => {
                let mut out = Vec::new();
                self.comprehension(gens, scope, &mut |interp, s| {
                    let v = interp.eval(elt, s)?;
                    check_growth(out.len())?;
                    out.push(v);
                    Ok(())
                })?;
                Value::set(out)
            }
            Expr::DictComp(key, value, gens) => {
                let mut out = Vec::new();
                self.comprehension(gens, scope, &mut |interp, s| {
                    let k = interp.eval(key, s)?;
                    let v = interp.eval(value, s)?;
                    check_growth(out.len())?;
                    out.push((k, v));
                    Ok(())
                })?;
                Value::dict(out)
            }
            Expr::Lambda(def) => self.make_function(def, scope),
            Expr::Starred(_) => Err(exc("SyntaxError", "can't use starred expression here")),
            Expr::Walrus(name, value) => {
                let value = self.eval(value, scope)?;
                self.assign_name(name, value.clone(), scope);
                Ok(value)
            }
        }
    }

    fn eval_items(&mut self, items: &[Expr], scope: &Rc<Scope>) -> PyResult<Vec<Value>> {
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Expr::Starred(inner) => {
                    let v = self.eval(inner, scope)?;
                    out.extend(self.collect(&v)?);
                }
                other => out.push(self.eval(other, scope)?),
            }
        }
        Ok(out)
    }

    fn comprehension(
        &mut self,
        gens: &[Comprehension],
        scope: &Rc<Scope>,
        emit: &mut dyn FnMut(&mut Self, &Rc<Scope>) -> PyResult<()>,
    ) -> PyResult<()> {
        let mut names = std::collections::BTreeSet::new();
        for g in gens {
            collect_target_names(&g.target, &mut names);
        }
        // the outermost iterable is evaluated in the enclosing scope
        let first = self.eval(&gens[0].iter, scope)?;
        let inner = Scope::new(Some(Rc::new(names.into_iter().collect())), Some(scope.clone()));
        self.comp_level(gens, 0, Some(first), &inner, emit)
    }

    fn comp_level(
        &mut self,
        gens: &[Comprehension],
        level: usize,
        iterable: Option<Value>,
        scope: &Rc<Scope>,
        emit: &mut dyn FnMut(&mut Self, &Rc<Scope>) -> PyResult<()>,
    ) -> PyResult<()> {
        let Some(g) = gens.get(level) else {
            return emit(self, scope);
        };
        let iterable = match iterable {
            Some(v) => v,
            None => self.eval(&g.iter, scope)?,
        };
        let mut source = self.source(&iterable)?;
        'items: while let Some(item) = source.next(self)? {
            self.assign(&g.target, item, scope)?;
            for cond in &g.conditions {
                if !self.eval(cond, scope)?.truthy() {
                    continue 'items;
                }
            }
            self.comp_level(gens, level + 1, None, scope, emit)?;
        }
        Ok(())
    }
}

fn collect_target_names(target: &Expr, out: &mut std::collections::BTreeSet<String>) {
    match target {
        Expr::Name(n) => {
            out.insert(n.clone());
        }
        Expr::Tuple(items) | Expr::List(items) => items.iter().for_each(|t| collect_target_names(t, out)),
        Expr::Starred(inner) => collect_target_names(inner, out),
        _ => {}
    }
}

/// Charges growing scratch vectors in coarse steps so runaway accumulation
/// hits the heap budget before the host allocator.
pub fn check_growth(len: usize) -> PyResult<()> {
    if len > 0 && len.is_multiple_of(4096) {
        let projected = len.saturating_mul(std::mem::size_of::<Value>());
        if heap_used().saturating_add(projected) > heap_limit() {
            return Err(Flow::Memory);
        }
    }
    Ok(())
}
