//! Recursive-descent parser producing [`super::ast`] nodes.

use std::collections::BTreeSet;
use std::rc::Rc;

use super::ast::*;
use super::lexer::{tokenize, FPart, Tok, Token};
use super::SyntaxErr;

/// Nesting bound keeping recursion on the host stack shallow.
const MAX_NESTING: usize = 200;

pub fn parse_module(src: &str) -> Result<Vec<Stmt>, SyntaxErr> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0, nesting: 0 };
    let mut body = Vec::new();
    while !p.at(&Tok::Eof) {
        if p.eat_tok(&Tok::Newline) {
            continue;
        }
        body.extend(p.statement()?);
    }
    Ok(body)
}

/// Parses a single expression (used for f-string fields).
pub fn parse_expression(src: &str) -> Result<Expr, SyntaxErr> {
    let tokens = tokenize(src.trim())?;
    let mut p = Parser { tokens, pos: 0, nesting: 0 };
    let expr = p.testlist()?;
    while p.eat_tok(&Tok::Newline) {}
    if !p.at(&Tok::Eof) {
        return Err(p.err("invalid syntax in expression"));
    }
    Ok(expr)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    nesting: usize,
}

fn is_keyword(word: &str) -> bool {
    matches!(
        word,
        "False" | "None" | "True" | "and" | "as" | "assert" | "async" | "await" | "break" | "class" | "continue"
            | "def" | "del" | "elif" | "else" | "except" | "finally" | "for" | "from" | "global" | "if" | "import"
            | "in" | "is" | "lambda" | "nonlocal" | "not" | "or" | "pass" | "raise" | "return" | "try" | "while"
            | "with" | "yield"
    )
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn line(&self) -> usize {
        self.tokens[self.pos].line
    }

    fn err(&self, message: impl Into<String>) -> SyntaxErr {
        SyntaxErr { line: self.line(), message: message.into() }
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn advance(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn eat_tok(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), SyntaxErr> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{op}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxErr> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{kw}'")))
        }
    }

    fn name(&mut self) -> Result<String, SyntaxErr> {
        match self.peek().clone() {
            Tok::Name(n) if !is_keyword(&n) => {
                self.advance();
                Ok(n)
            }
            _ => Err(self.err("expected a name")),
        }
    }

    fn enter(&mut self) -> Result<(), SyntaxErr> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            Err(self.err("too many nested expressions"))
        } else {
            Ok(())
        }
    }

    fn leave(&mut self) {
        self.nesting -= 1;
    }

    // ---- statements ----

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxErr> {
        self.enter()?;
        let result = self.block_inner();
        self.leave();
        result
    }

    fn block_inner(&mut self) -> Result<Vec<Stmt>, SyntaxErr> {
        if !self.eat_tok(&Tok::Newline) {
            // one-line body: `if x: return 1`
            return self.simple_statements();
        }
        if !self.eat_tok(&Tok::Indent) {
            return Err(self.err("expected an indented block"));
        }
        let mut body = Vec::new();
        while !self.eat_tok(&Tok::Dedent) {
            if self.at(&Tok::Eof) {
                break;
            }
            if self.eat_tok(&Tok::Newline) {
                continue;
            }
            body.extend(self.statement()?);
        }
        Ok(body)
    }

    fn statement(&mut self) -> Result<Vec<Stmt>, SyntaxErr> {
        let line = self.line();
        let stmt = |kind| Stmt { kind, line };
        if self.at(&Tok::Indent) {
            return Err(self.err("unexpected indent"));
        }
        if self.at_op("@") {
            let mut decorators = Vec::new();
            while self.eat_op("@") {
                decorators.push(self.test()?);
                self.eat_tok(&Tok::Newline);
            }
            if !self.at_kw("def") {
                return Err(self.err("decorators are supported on functions only"));
            }
            let def = self.funcdef()?;
            // desugared to `name = deco(name)` after the definition
            let name = def.name.clone();
            let mut out = vec![stmt(StmtKind::Def(def))];
            let mut value = Expr::Name(name.clone());
            for deco in decorators.into_iter().rev() {
                value = Expr::Call(Box::new(deco), vec![Arg::Positional(value)]);
            }
            out.push(stmt(StmtKind::Assign(vec![Expr::Name(name)], value)));
            return Ok(out);
        }
        let kw = match self.peek() {
            Tok::Name(n) => n.clone(),
            _ => String::new(),
        };
        let kind = match kw.as_str() {
            "def" => StmtKind::Def(self.funcdef()?),
            "if" => {
                self.advance();
                self.if_rest()?
            }
            "while" => {
                self.advance();
                let cond = self.namedexpr()?;
                self.expect_op(":")?;
                let body = self.block()?;
                let orelse = self.else_block()?;
                StmtKind::While(cond, body, orelse)
            }
            "for" => {
                self.advance();
                let target = self.target_list()?;
                self.expect_kw("in")?;
                let iter = self.testlist()?;
                self.expect_op(":")?;
                let body = self.block()?;
                let orelse = self.else_block()?;
                StmtKind::For(target, iter, body, orelse)
            }
            "try" => {
                self.advance();
                self.try_rest()?
            }
            "class" => return Err(self.err("class definitions are not supported")),
            "with" => return Err(self.err("with statements are not supported")),
            "async" => return Err(self.err("async functions are not supported")),
            _ => return self.simple_statements(),
        };
        Ok(vec![stmt(kind)])
    }

    fn else_block(&mut self) -> Result<Vec<Stmt>, SyntaxErr> {
        if self.eat_kw("else") {
            self.expect_op(":")?;
            self.block()
        } else {
            Ok(Vec::new())
        }
    }

    fn if_rest(&mut self) -> Result<StmtKind, SyntaxErr> {
        let cond = self.namedexpr()?;
        self.expect_op(":")?;
        let body = self.block()?;
        let orelse = if self.at_kw("elif") {
            let line = self.line();
            self.advance();
            vec![Stmt { kind: self.if_rest()?, line }]
        } else {
            self.else_block()?
        };
        Ok(StmtKind::If(cond, body, orelse))
    }

    fn try_rest(&mut self) -> Result<StmtKind, SyntaxErr> {
        self.expect_op(":")?;
        let body = self.block()?;
        let mut handlers = Vec::new();
        while self.eat_kw("except") {
            let (kind, name) = if self.at_op(":") {
                (None, None)
            } else {
                let kind = self.test()?;
                let name = if self.eat_kw("as") { Some(self.name()?) } else { None };
                (Some(kind), name)
            };
            self.expect_op(":")?;
            handlers.push(Handler { kind, name, body: self.block()? });
        }
        let orelse = self.else_block()?;
        let finally = if self.eat_kw("finally") {
            self.expect_op(":")?;
            self.block()?
        } else {
            Vec::new()
        };
        if handlers.is_empty() && finally.is_empty() {
            return Err(self.err("expected 'except' or 'finally' block"));
        }
        Ok(StmtKind::Try { body, handlers, orelse, finally })
    }

    fn funcdef(&mut self) -> Result<Rc<FuncDef>, SyntaxErr> {
        self.expect_kw("def")?;
        let name = self.name()?;
        self.expect_op("(")?;
        let (params, star, kwonly, double_star) = self.parameters(")")?;
        self.expect_op(")")?;
        if self.eat_op("->") {
            self.test()?;
        }
        self.expect_op(":")?;
        let body = self.block()?;
        Ok(Rc::new(finish_function(name, params, star, kwonly, double_star, body)))
    }

    #[allow(clippy::type_complexity)]
    fn parameters(&mut self, close: &str) -> Result<(Vec<Param>, Option<String>, Vec<Param>, Option<String>), SyntaxErr> {
        let mut params = Vec::new();
        let mut kwonly = Vec::new();
        let mut star = None;
        let mut double_star = None;
        let mut seen_star = false;
        while !self.at_op(close) {
            if self.eat_op("**") {
                double_star = Some(self.name()?);
            } else if self.eat_op("*") {
                seen_star = true;
                if !self.at_op(",") && !self.at_op(close) {
                    star = Some(self.name()?);
                }
            } else if self.eat_op("/") {
                // positional-only marker; no semantic effect here
            } else {
                let name = self.name()?;
                if close == ")" && self.eat_op(":") {
                    self.test()?;
                }
                let default = if self.eat_op("=") { Some(self.test()?) } else { None };
                if seen_star {
                    kwonly.push(Param { name, default });
                } else {
                    params.push(Param { name, default });
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok((params, star, kwonly, double_star))
    }

    fn simple_statements(&mut self) -> Result<Vec<Stmt>, SyntaxErr> {
        let mut out = Vec::new();
        loop {
            let line = self.line();
            let kind = self.simple_statement()?;
            out.push(Stmt { kind, line });
            if !self.eat_op(";") {
                break;
            }
            if self.at(&Tok::Newline) {
                break;
            }
        }
        if !self.eat_tok(&Tok::Newline) && !self.at(&Tok::Eof) {
            return Err(self.err("invalid syntax"));
        }
        Ok(out)
    }

    fn simple_statement(&mut self) -> Result<StmtKind, SyntaxErr> {
        let kw = match self.peek() {
            Tok::Name(n) => n.clone(),
            _ => String::new(),
        };
        match kw.as_str() {
            "pass" => {
                self.advance();
                Ok(StmtKind::Pass)
            }
            "break" => {
                self.advance();
                Ok(StmtKind::Break)
            }
            "continue" => {
                self.advance();
                Ok(StmtKind::Continue)
            }
            "return" => {
                self.advance();
                let value = if self.at_statement_end() { None } else { Some(self.testlist_star()?) };
                Ok(StmtKind::Return(value))
            }
            "raise" => {
                self.advance();
                let value = if self.at_statement_end() { None } else { Some(self.test()?) };
                if self.eat_kw("from") {
                    self.test()?;
                }
                Ok(StmtKind::Raise(value))
            }
            "yield" => {
                self.advance();
                if self.eat_kw("from") {
                    let source = self.test()?;
                    return Ok(StmtKind::Yield(Some(Expr::Starred(Box::new(source)))));
                }
                let value = if self.at_statement_end() { None } else { Some(self.testlist_star()?) };
                Ok(StmtKind::Yield(value))
            }
            "assert" => {
                self.advance();
                let test = self.test()?;
                let msg = if self.eat_op(",") { Some(self.test()?) } else { None };
                Ok(StmtKind::Assert(test, msg))
            }
            "global" | "nonlocal" => {
                self.advance();
                let mut names = vec![self.name()?];
                while self.eat_op(",") {
                    names.push(self.name()?);
                }
                Ok(if kw == "global" { StmtKind::Global(names) } else { StmtKind::Nonlocal(names) })
            }
            "del" => {
                self.advance();
                let mut targets = vec![self.bitor()?];
                while self.eat_op(",") {
                    if self.at_statement_end() {
                        break;
                    }
                    targets.push(self.bitor()?);
                }
                Ok(StmtKind::Del(targets))
            }
            "import" => {
                self.advance();
                let mut names = Vec::new();
                loop {
                    let module = self.dotted_name()?;
                    let alias = if self.eat_kw("as") { Some(self.name()?) } else { None };
                    names.push((module, alias));
                    if !self.eat_op(",") {
                        break;
                    }
                }
                Ok(StmtKind::Import(names))
            }
            "from" => {
                self.advance();
                let module = self.dotted_name()?;
                self.expect_kw("import")?;
                let paren = self.eat_op("(");
                let mut names = Vec::new();
                if self.eat_op("*") {
                    names.push(("*".to_string(), None));
                } else {
                    loop {
                        if paren && self.at_op(")") {
                            break;
                        }
                        let name = self.name()?;
                        let alias = if self.eat_kw("as") { Some(self.name()?) } else { None };
                        names.push((name, alias));
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                }
                if paren {
                    self.expect_op(")")?;
                }
                Ok(StmtKind::ImportFrom(module, names))
            }
            _ => self.expr_statement(),
        }
    }

    fn dotted_name(&mut self) -> Result<String, SyntaxErr> {
        let mut name = self.name()?;
        while self.eat_op(".") {
            name.push('.');
            name.push_str(&self.name()?);
        }
        Ok(name)
    }

    fn at_statement_end(&self) -> bool {
        matches!(self.peek(), Tok::Newline | Tok::Eof) || self.at_op(";")
    }

    fn expr_statement(&mut self) -> Result<StmtKind, SyntaxErr> {
        let first = self.testlist_star()?;
        if self.eat_op(":") {
            // annotated assignment
            self.test()?;
            let value = if self.eat_op("=") { Some(self.testlist_star()?) } else { None };
            check_target(&first).map_err(|m| self.err(m))?;
            return Ok(StmtKind::AnnAssign(first, value));
        }
        let aug = [
            ("+=", BinOp::Add),
            ("-=", BinOp::Sub),
            ("*=", BinOp::Mul),
            ("/=", BinOp::Div),
            ("//=", BinOp::FloorDiv),
            ("%=", BinOp::Mod),
            ("**=", BinOp::Pow),
            ("&=", BinOp::BitAnd),
            ("|=", BinOp::BitOr),
            ("^=", BinOp::BitXor),
            ("<<=", BinOp::LShift),
            (">>=", BinOp::RShift),
        ];
        for (op, bin) in aug {
            if self.eat_op(op) {
                let value = self.testlist()?;
                if !matches!(first, Expr::Name(_) | Expr::Attr(..) | Expr::Subscript(..)) {
                    return Err(self.err("illegal expression for augmented assignment"));
                }
                return Ok(StmtKind::AugAssign(first, bin, value));
            }
        }
        if !self.at_op("=") {
            return Ok(StmtKind::Expr(first));
        }
        let mut targets = vec![first];
        let mut value;
        loop {
            self.expect_op("=")?;
            value = self.testlist_star()?;
            if self.at_op("=") {
                targets.push(value);
            } else {
                break;
            }
        }
        for target in &targets {
            check_target(target).map_err(|m| self.err(m))?;
        }
        Ok(StmtKind::Assign(targets, value))
    }

    // ---- expressions ----

    fn target_list(&mut self) -> Result<Expr, SyntaxErr> {
        let first = self.star_or(Self::bitor)?;
        if !self.at_op(",") {
            check_target(&first).map_err(|m| self.err(m))?;
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_kw("in") || self.at_op("=") {
                break;
            }
            items.push(self.star_or(Self::bitor)?);
        }
        let target = Expr::Tuple(items);
        check_target(&target).map_err(|m| self.err(m))?;
        Ok(target)
    }

    fn star_or(&mut self, f: fn(&mut Self) -> Result<Expr, SyntaxErr>) -> Result<Expr, SyntaxErr> {
        if self.eat_op("*") {
            Ok(Expr::Starred(Box::new(self.bitor()?)))
        } else {
            f(self)
        }
    }

    /// Comma-separated tests; a trailing comma or several items form a tuple.
    fn testlist(&mut self) -> Result<Expr, SyntaxErr> {
        self.list_of(Self::test)
    }

    fn testlist_star(&mut self) -> Result<Expr, SyntaxErr> {
        self.list_of(|p| p.star_or(Self::test))
    }

    fn list_of(&mut self, f: fn(&mut Self) -> Result<Expr, SyntaxErr>) -> Result<Expr, SyntaxErr> {
        let first = f(self)?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() {
                break;
            }
            items.push(f(self)?);
        }
        Ok(Expr::Tuple(items))
    }

    fn at_expr_end(&self) -> bool {
        matches!(self.peek(), Tok::Newline | Tok::Eof)
            || [")", "]", "}", "=", ":", ";"].iter().any(|op| self.at_op(op))
            || self.at_kw("in")
    }

    fn namedexpr(&mut self) -> Result<Expr, SyntaxErr> {
        if let (Tok::Name(n), Tok::Op(":=")) = (self.peek().clone(), self.peek_at(1).clone()) {
            self.advance();
            self.advance();
            let value = self.test()?;
            return Ok(Expr::Walrus(n, Box::new(value)));
        }
        self.test()
    }

    fn test(&mut self) -> Result<Expr, SyntaxErr> {
        self.enter()?;
        let result = self.test_inner();
        self.leave();
        result
    }

    fn test_inner(&mut self) -> Result<Expr, SyntaxErr> {
        if self.at_kw("lambda") {
            self.advance();
            let (params, star, kwonly, double_star) = self.parameters(":")?;
            self.expect_op(":")?;
            let body = self.test()?;
            let stmt = Stmt { kind: StmtKind::Return(Some(body)), line: self.line() };
            return Ok(Expr::Lambda(Rc::new(finish_function(
                "<lambda>".into(),
                params,
                star,
                kwonly,
                double_star,
                vec![stmt],
            ))));
        }
        let value = self.or_test()?;
        if self.at_kw("if") && !self.in_comprehension_condition() {
            self.advance();
            let cond = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.test()?;
            return Ok(Expr::IfExp { cond: Box::new(cond), then: Box::new(value), orelse: Box::new(orelse) });
        }
        Ok(value)
    }

    /// `[x for x in xs if c]`: the `if` belongs to the comprehension when no
    /// matching `else` follows before the closing bracket.
    fn in_comprehension_condition(&self) -> bool {
        let mut depth = 0i32;
        let mut i = self.pos + 1;
        while i < self.tokens.len() {
            match &self.tokens[i].tok {
                Tok::Op("(" | "[" | "{") => depth += 1,
                Tok::Op(")" | "]" | "}") => {
                    if depth == 0 {
                        return true;
                    }
                    depth -= 1;
                }
                Tok::Name(n) if depth == 0 && n == "else" => return false,
                Tok::Name(n) if depth == 0 && (n == "for" || n == "if") => return true,
                Tok::Newline | Tok::Eof => return true,
                _ => {}
            }
            i += 1;
        }
        true
    }

    fn or_test(&mut self) -> Result<Expr, SyntaxErr> {
        let mut left = self.and_test()?;
        while self.eat_kw("or") {
            let right = self.and_test()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_test(&mut self) -> Result<Expr, SyntaxErr> {
        let mut left = self.not_test()?;
        while self.eat_kw("and") {
            let right = self.not_test()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_test(&mut self) -> Result<Expr, SyntaxErr> {
        if self.eat_kw("not") {
            self.enter()?;
            let inner = self.not_test();
            self.leave();
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(inner?)));
        }
        self.comparison()
    }

    fn comp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Tok::Op("==") => CmpOp::Eq,
            Tok::Op("!=") => CmpOp::Ne,
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op("<=") => CmpOp::Le,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op(">=") => CmpOp::Ge,
            Tok::Name(n) if n == "in" => CmpOp::In,
            Tok::Name(n) if n == "not" && matches!(self.peek_at(1), Tok::Name(m) if m == "in") => {
                self.advance();
                CmpOp::NotIn
            }
            Tok::Name(n) if n == "is" => {
                if matches!(self.peek_at(1), Tok::Name(m) if m == "not") {
                    self.advance();
                    self.advance();
                    return Some(CmpOp::IsNot);
                }
                CmpOp::Is
            }
            _ => return None,
        };
        self.advance();
        Some(op)
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxErr> {
        let left = self.bitor()?;
        let mut rest = Vec::new();
        while let Some(op) = self.comp_op() {
            rest.push((op, self.bitor()?));
        }
        if rest.is_empty() {
            Ok(left)
        } else {
            Ok(Expr::Compare(Box::new(left), rest))
        }
    }

    fn binary(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> Result<Expr, SyntaxErr>,
    ) -> Result<Expr, SyntaxErr> {
        let mut left = next(self)?;
        'outer: loop {
            for (tok, op) in ops {
                if self.eat_op(tok) {
                    let right = next(self)?;
                    left = Expr::Bin(Box::new(left), *op, Box::new(right));
                    continue 'outer;
                }
            }
            return Ok(left);
        }
    }

    fn bitor(&mut self) -> Result<Expr, SyntaxErr> {
        self.binary(&[("|", BinOp::BitOr)], Self::bitxor)
    }

    fn bitxor(&mut self) -> Result<Expr, SyntaxErr> {
        self.binary(&[("^", BinOp::BitXor)], Self::bitand)
    }

    fn bitand(&mut self) -> Result<Expr, SyntaxErr> {
        self.binary(&[("&", BinOp::BitAnd)], Self::shift)
    }

    fn shift(&mut self) -> Result<Expr, SyntaxErr> {
        self.binary(&[("<<", BinOp::LShift), (">>", BinOp::RShift)], Self::arith)
    }

    fn arith(&mut self) -> Result<Expr, SyntaxErr> {
        self.binary(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::term)
    }

    fn term(&mut self) -> Result<Expr, SyntaxErr> {
        self.binary(
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("//", BinOp::FloorDiv), ("%", BinOp::Mod), ("@", BinOp::MatMul)],
            Self::factor,
        )
    }

    fn factor(&mut self) -> Result<Expr, SyntaxErr> {
        let op = if self.eat_op("-") {
            UnaryOp::Neg
        } else if self.eat_op("+") {
            UnaryOp::Pos
        } else if self.eat_op("~") {
            UnaryOp::Invert
        } else {
            return self.power();
        };
        self.enter()?;
        let operand = self.factor();
        self.leave();
        let operand = operand?;
        // fold negative literals so that -9223372036854775808 stays representable
        if let (UnaryOp::Neg, Expr::Const(Const::Float(v))) = (op, &operand) {
            return Ok(Expr::Const(Const::Float(-v)));
        }
        Ok(Expr::Unary(op, Box::new(operand)))
    }

    fn power(&mut self) -> Result<Expr, SyntaxErr> {
        let base = self.primary()?;
        if self.eat_op("**") {
            self.enter()?;
            let exp = self.factor();
            self.leave();
            return Ok(Expr::Bin(Box::new(base), BinOp::Pow, Box::new(exp?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, SyntaxErr> {
        let mut expr = self.atom()?;
        loop {
            if self.eat_op("(") {
                let args = self.call_args()?;
                expr = Expr::Call(Box::new(expr), args);
            } else if self.eat_op("[") {
                let index = self.subscript()?;
                self.expect_op("]")?;
                expr = Expr::Subscript(Box::new(expr), Box::new(index));
            } else if self.eat_op(".") {
                let attr = match self.advance() {
                    Tok::Name(n) => n,
                    _ => return Err(self.err("expected attribute name")),
                };
                expr = Expr::Attr(Box::new(expr), attr);
            } else {
                return Ok(expr);
            }
        }
    }

    fn call_args(&mut self) -> Result<Vec<Arg>, SyntaxErr> {
        let mut args = Vec::new();
        while !self.at_op(")") {
            if self.eat_op("**") {
                args.push(Arg::DoubleStar(self.test()?));
            } else if self.eat_op("*") {
                args.push(Arg::Star(self.test()?));
            } else if let (Tok::Name(n), Tok::Op("=")) = (self.peek().clone(), self.peek_at(1).clone()) {
                self.advance();
                self.advance();
                args.push(Arg::Keyword(n, self.test()?));
            } else {
                let value = self.namedexpr()?;
                if self.at_kw("for") {
                    let gens = self.comprehensions()?;
                    args.push(Arg::Positional(Expr::GenExp(Box::new(value), gens)));
                } else {
                    args.push(Arg::Positional(value));
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok(args)
    }

    fn subscript(&mut self) -> Result<Expr, SyntaxErr> {
        let first = self.slice_item()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op("]") {
                break;
            }
            items.push(self.slice_item()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn slice_item(&mut self) -> Result<Expr, SyntaxErr> {
        let lower = if self.at_op(":") { None } else { Some(self.test()?) };
        if !self.eat_op(":") {
            return lower.ok_or_else(|| self.err("expected subscript"));
        }
        let bound = |p: &mut Self| -> Result<Option<Box<Expr>>, SyntaxErr> {
            if p.at_op(":") || p.at_op("]") || p.at_op(",") {
                Ok(None)
            } else {
                Ok(Some(Box::new(p.test()?)))
            }
        };
        let upper = bound(self)?;
        let step = if self.eat_op(":") { bound(self)? } else { None };
        Ok(Expr::Slice(lower.map(Box::new), upper, step))
    }

    fn comprehensions(&mut self) -> Result<Vec<Comprehension>, SyntaxErr> {
        let mut gens = Vec::new();
        while self.eat_kw("for") {
            let target = self.target_list()?;
            self.expect_kw("in")?;
            let iter = self.or_test()?;
            let mut conditions = Vec::new();
            while self.at_kw("if") {
                self.advance();
                conditions.push(self.or_test_nocond()?);
            }
            gens.push(Comprehension { target, iter, conditions });
        }
        Ok(gens)
    }

    fn or_test_nocond(&mut self) -> Result<Expr, SyntaxErr> {
        if self.at_kw("lambda") {
            return self.test();
        }
        self.or_test()
    }

    fn atom(&mut self) -> Result<Expr, SyntaxErr> {
        self.enter()?;
        let result = self.atom_inner();
        self.leave();
        result
    }

    fn atom_inner(&mut self) -> Result<Expr, SyntaxErr> {
        let tok = self.peek().clone();
        match tok {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Const(Const::Int(v)))
            }
            Tok::Float(v) => {
                self.advance();
                Ok(Expr::Const(Const::Float(v)))
            }
            Tok::Str(_) | Tok::FStr(_) => self.strings(),
            Tok::Name(n) => {
                self.advance();
                Ok(match n.as_str() {
                    "None" => Expr::Const(Const::None),
                    "True" => Expr::Const(Const::Bool(true)),
                    "False" => Expr::Const(Const::Bool(false)),
                    "yield" | "await" => return Err(self.err(format!("'{n}' expressions are not supported"))),
                    _ if is_keyword(&n) => return Err(self.err(format!("invalid syntax near '{n}'"))),
                    _ => Expr::Name(n),
                })
            }
            Tok::Op("...") => {
                self.advance();
                Ok(Expr::Const(Const::Ellipsis))
            }
            Tok::Op("(") => {
                self.advance();
                if self.eat_op(")") {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                let first = self.star_or(Self::namedexpr)?;
                if self.at_kw("for") {
                    let gens = self.comprehensions()?;
                    self.expect_op(")")?;
                    return Ok(Expr::GenExp(Box::new(first), gens));
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op(")") {
                        break;
                    }
                    items.push(self.star_or(Self::namedexpr)?);
                }
                self.expect_op(")")?;
                Ok(Expr::Tuple(items))
            }
            Tok::Op("[") => {
                self.advance();
                if self.eat_op("]") {
                    return Ok(Expr::List(Vec::new()));
                }
                let first = self.star_or(Self::namedexpr)?;
                if self.at_kw("for") {
                    let gens = self.comprehensions()?;
                    self.expect_op("]")?;
                    return Ok(Expr::ListComp(Box::new(first), gens));
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op("]") {
                        break;
                    }
                    items.push(self.star_or(Self::namedexpr)?);
                }
                self.expect_op("]")?;
                Ok(Expr::List(items))
            }
            Tok::Op("{") => {
                self.advance();
                self.braces()
            }
            _ => Err(self.err("invalid syntax")),
        }
    }

    fn braces(&mut self) -> Result<Expr, SyntaxErr> {
        if self.eat_op("}") {
            return Ok(Expr::Dict(Vec::new()));
        }
        if self.eat_op("**") {
            let first = self.bitor()?;
            return self.dict_rest(vec![(None, first)]);
        }
        let first = self.star_or(Self::test)?;
        if self.eat_op(":") {
            let value = self.test()?;
            if self.at_kw("for") {
                let gens = self.comprehensions()?;
                self.expect_op("}")?;
                return Ok(Expr::DictComp(Box::new(first), Box::new(value), gens));
            }
            return self.dict_rest(vec![(Some(first), value)]);
        }
        if self.at_kw("for") {
            let gens = self.comprehensions()?;
            self.expect_op("}")?;
            return Ok(Expr::SetComp(Box::new(first), gens));
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op("}") {
                break;
            }
            items.push(self.star_or(Self::test)?);
        }
        self.expect_op("}")?;
        Ok(Expr::Set(items))
    }

    fn dict_rest(&mut self, mut entries: Vec<(Option<Expr>, Expr)>) -> Result<Expr, SyntaxErr> {
        while self.eat_op(",") {
            if self.at_op("}") {
                break;
            }
            if self.eat_op("**") {
                entries.push((None, self.bitor()?));
                continue;
            }
            let key = self.test()?;
            self.expect_op(":")?;
            entries.push((Some(key), self.test()?));
        }
        self.expect_op("}")?;
        Ok(Expr::Dict(entries))
    }

    /// Adjacent string literals concatenate.
    fn strings(&mut self) -> Result<Expr, SyntaxErr> {
        let mut parts: Vec<FStrPart> = Vec::new();
        let mut formatted = false;
        loop {
            match self.peek().clone() {
                Tok::Str(s) => {
                    self.advance();
                    parts.push(FStrPart::Text(s));
                }
                Tok::FStr(fparts) => {
                    formatted = true;
                    self.advance();
                    for part in fparts {
                        parts.push(match part {
                            FPart::Text(t) => FStrPart::Text(t),
                            FPart::Expr { source, spec, conversion } => {
                                let expr = parse_expression(&source).map_err(|e| self.err(e.message))?;
                                FStrPart::Expr { expr, spec, conversion }
                            }
                        });
                    }
                }
                _ => break,
            }
        }
        if !formatted {
            let text: String = parts
                .into_iter()
                .map(|p| match p {
                    FStrPart::Text(t) => t,
                    FStrPart::Expr { .. } => unreachable!("plain strings have no fields"),
                })
                .collect();
            return Ok(Expr::Const(Const::Str(text.into())));
        }
        Ok(Expr::FStr(parts))
    }
}

fn check_target(target: &Expr) -> Result<(), String> {
    match target {
        Expr::Name(_) | Expr::Attr(..) | Expr::Subscript(..) => Ok(()),
        Expr::Tuple(items) | Expr::List(items) => items.iter().try_for_each(check_target),
        Expr::Starred(inner) => check_target(inner),
        _ => Err("cannot assign to expression".into()),
    }
}

fn finish_function(
    name: String,
    params: Vec<Param>,
    star: Option<String>,
    kwonly: Vec<Param>,
    double_star: Option<String>,
    body: Vec<Stmt>,
) -> FuncDef {
    let mut bound = BTreeSet::new();
    let mut globals = BTreeSet::new();
    let mut nonlocals = BTreeSet::new();
    let mut is_generator = false;
    for p in params.iter().chain(&kwonly) {
        bound.insert(p.name.clone());
    }
    bound.extend(star.iter().cloned());
    bound.extend(double_star.iter().cloned());
    collect_bindings(&body, &mut bound, &mut globals, &mut nonlocals, &mut is_generator);
    let locals = bound.into_iter().filter(|n| !globals.contains(n) && !nonlocals.contains(n)).collect();
    FuncDef {
        name,
        params,
        star,
        kwonly,
        double_star,
        body,
        locals,
        globals: globals.into_iter().collect(),
        nonlocals: nonlocals.into_iter().collect(),
        is_generator,
    }
}

fn target_names(target: &Expr, out: &mut BTreeSet<String>) {
    match target {
        Expr::Name(n) => {
            out.insert(n.clone());
        }
        Expr::Tuple(items) | Expr::List(items) => items.iter().for_each(|t| target_names(t, out)),
        Expr::Starred(inner) => target_names(inner, out),
        _ => {}
    }
}

fn expr_walrus(expr: &Expr, out: &mut BTreeSet<String>) {
    // walrus targets bind in the enclosing function, even inside comprehensions
    match expr {
        Expr::Walrus(n, value) => {
            out.insert(n.clone());
            expr_walrus(value, out);
        }
        Expr::Bin(a, _, b) | Expr::And(a, b) | Expr::Or(a, b) | Expr::Subscript(a, b) => {
            expr_walrus(a, out);
            expr_walrus(b, out);
        }
        Expr::Unary(_, a) | Expr::Attr(a, _) | Expr::Starred(a) => expr_walrus(a, out),
        Expr::Compare(a, rest) => {
            expr_walrus(a, out);
            rest.iter().for_each(|(_, e)| expr_walrus(e, out));
        }
        Expr::Call(f, args) => {
            expr_walrus(f, out);
            for arg in args {
                match arg {
                    Arg::Positional(e) | Arg::Star(e) | Arg::Keyword(_, e) | Arg::DoubleStar(e) => expr_walrus(e, out),
                }
            }
        }
        Expr::IfExp { cond, then, orelse } => {
            expr_walrus(cond, out);
            expr_walrus(then, out);
            expr_walrus(orelse, out);
        }
        Expr::Tuple(items) | Expr::List(items) | Expr::Set(items) => items.iter().for_each(|e| expr_walrus(e, out)),
        Expr::ListComp(e, gens) | Expr::SetComp(e, gens) | Expr::GenExp(e, gens) => {
            expr_walrus(e, out);
            for g in gens {
                expr_walrus(&g.iter, out);
                g.conditions.iter().for_each(|c| expr_walrus(c, out));
            }
        }
        _ => {}
    }
}

fn collect_bindings(
    body: &[Stmt],
    bound: &mut BTreeSet<String>,
    globals: &mut BTreeSet<String>,
    nonlocals: &mut BTreeSet<String>,
    is_generator: &mut bool,
) {
    for stmt in body {
        match &stmt.kind {
            StmtKind::Assign(targets, value) => {
                targets.iter().for_each(|t| target_names(t, bound));
                expr_walrus(value, bound);
            }
            StmtKind::AugAssign(target, _, _) | StmtKind::AnnAssign(target, _) => target_names(target, bound),
            StmtKind::Expr(e) | StmtKind::Return(Some(e)) => expr_walrus(e, bound),
            StmtKind::If(cond, a, b) | StmtKind::While(cond, a, b) => {
                expr_walrus(cond, bound);
                collect_bindings(a, bound, globals, nonlocals, is_generator);
                collect_bindings(b, bound, globals, nonlocals, is_generator);
            }
            StmtKind::For(target, _, a, b) => {
                target_names(target, bound);
                collect_bindings(a, bound, globals, nonlocals, is_generator);
                collect_bindings(b, bound, globals, nonlocals, is_generator);
            }
            StmtKind::Def(def) => {
                bound.insert(def.name.clone());
            }
            StmtKind::Import(names) => {
                for (module, alias) in names {
                    let local = alias.clone().unwrap_or_else(|| module.split('.').next().unwrap_or(module).to_string());
                    bound.insert(local);
                }
            }
            StmtKind::ImportFrom(_, names) => {
                for (name, alias) in names {
                    if name != "*" {
                        bound.insert(alias.clone().unwrap_or_else(|| name.clone()));
                    }
                }
            }
            StmtKind::Global(names) => globals.extend(names.iter().cloned()),
            StmtKind::Nonlocal(names) => nonlocals.extend(names.iter().cloned()),
            StmtKind::Try { body, handlers, orelse, finally } => {
                collect_bindings(body, bound, globals, nonlocals, is_generator);
                for h in handlers {
                    if let Some(n) = &h.name {
                        bound.insert(n.clone());
                    }
                    collect_bindings(&h.body, bound, globals, nonlocals, is_generator);
                }
                collect_bindings(orelse, bound, globals, nonlocals, is_generator);
                collect_bindings(finally, bound, globals, nonlocals, is_generator);
            }
            StmtKind::Del(targets) => targets.iter().for_each(|t| target_names(t, bound)),
            StmtKind::Yield(_) => *is_generator = true,
            _ => {}
        }
    }
}
