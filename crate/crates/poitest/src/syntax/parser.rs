//! Recursive descent parser for MiniFun.

use thiserror::Error;

use super::ast::*;
use super::token::{tokenize, Tok, Token};
use crate::poi::{Frame, FrameKind, Poi, PoiKind};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Lex { message: String, line: u32, column: u32 },
    #[error("{line}:{column}: unexpected {found}, expected {}", expected.join(" or "))]
    UnexpectedToken { expected: Vec<String>, found: String, line: u32, column: u32 },
    #[error("line {line}: clause of {name} has a different arity than the first clause")]
    ClauseArityMismatch { name: String, line: u32 },
    #[error("line {line}: clause named {name} inside definition of {expected}")]
    ClauseNameMismatch { name: String, expected: String, line: u32 },
    #[error("line {line}: duplicate definition of {name}/{arity}")]
    DuplicateFunction { name: String, arity: usize, line: u32 },
    #[error("{line}:{column}: variable {name} uses the reserved __poi_ prefix")]
    ReservedVariable { name: String, line: u32, column: u32 },
    #[error("module name {name} is reserved for builtins")]
    ReservedModuleName { name: String },
    #[error("-spec for undefined function {name}/{arity}")]
    SpecWithoutFunction { name: String, arity: usize },
    #[error("{line}:{column}: expression is not a valid pattern")]
    InvalidPattern { line: u32, column: u32 },
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Accept variables with the reserved `__poi_` instrumentation prefix.
    pub allow_reserved_vars: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { allow_reserved_vars: false }
    }
}

/// Parse a MiniFun module from source text.
///
/// Parsing is deterministic; every AST node receives a [`SourcePos`] with a
/// preorder node id. Variables with the reserved `__poi_` prefix are
/// rejected, keeping instrumentation-introduced names fresh by construction.
pub fn parse_module(source: &str, path: &str) -> Result<SourceModule, ParseError> {
    parse_module_with(source, path, ParseOptions::default())
}

/// Like [`parse_module`] but with explicit options. Used to re-parse
/// pretty-printed instrumented modules, which contain reserved variables.
pub fn parse_module_with(
    source: &str,
    path: &str,
    options: ParseOptions,
) -> Result<SourceModule, ParseError> {
    let tokens = tokenize(source)
        .map_err(|e| ParseError::Lex { message: e.message, line: e.line, column: e.column })?;
    let mut parser = Parser { tokens, pos: 0, options };
    parser.module(path)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    options: ParseOptions,
}

const RESERVED_MODULES: [&str; 3] = ["lists", "string", "erlang"];
pub(crate) const RESERVED_VAR_PREFIX: &str = "__poi_";

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        let i = (self.pos + 1).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.tokens[self.pos];
        (t.line, t.column)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        let t = &self.tokens[self.pos];
        Err(ParseError::UnexpectedToken {
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.to_string(),
            line: t.line,
            column: t.column,
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if self.peek() == &tok {
            Ok(self.bump())
        } else {
            self.unexpected(&[what])
        }
    }

    fn expect_atom(&mut self, what: &str) -> Result<(String, Token), ParseError> {
        match self.peek().clone() {
            Tok::Atom(name) => Ok((name, self.bump())),
            _ => self.unexpected(&[what]),
        }
    }

    fn expect_int(&mut self) -> Result<i64, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.unexpected(&["integer"]),
        }
    }

    fn module(&mut self, path: &str) -> Result<SourceModule, ParseError> {
        let stem = path.rsplit('/').next().unwrap_or(path);
        let default_name = stem.strip_suffix(".mf").unwrap_or(stem).to_string();
        let mut m = SourceModule {
            name: default_name,
            source_path: path.to_string(),
            exports: Vec::new(),
            functions: Vec::new(),
            max_node_id: 0,
            poi_instrumented: false,
            stack_instrumented: false,
        };
        let mut specs: Vec<(String, usize, Vec<ParamType>)> = Vec::new();
        while self.peek() != &Tok::Eof {
            if self.eat(&Tok::Minus) {
                self.attribute(&mut m, &mut specs)?;
            } else {
                let fun = self.fundef()?;
                if m.functions.iter().any(|f| f.name == fun.name && f.arity == fun.arity) {
                    return Err(ParseError::DuplicateFunction {
                        name: fun.name,
                        arity: fun.arity,
                        line: fun.line,
                    });
                }
                m.functions.push(fun);
            }
        }
        for (name, arity, types) in specs {
            match m.functions.iter_mut().find(|f| f.name == name && f.arity == arity) {
                Some(f) => f.spec = Some(types),
                None => return Err(ParseError::SpecWithoutFunction { name, arity }),
            }
        }
        number_module(&mut m);
        Ok(m)
    }

    fn attribute(
        &mut self,
        m: &mut SourceModule,
        specs: &mut Vec<(String, usize, Vec<ParamType>)>,
    ) -> Result<(), ParseError> {
        let (name, _) = self.expect_atom("attribute name")?;
        match name.as_str() {
            "module" => {
                self.expect(Tok::LParen, "(")?;
                let (mod_name, _) = self.expect_atom("module name")?;
                if RESERVED_MODULES.contains(&mod_name.as_str()) {
                    return Err(ParseError::ReservedModuleName { name: mod_name });
                }
                m.name = mod_name;
                self.expect(Tok::RParen, ")")?;
            }
            "export" => {
                self.expect(Tok::LParen, "(")?;
                self.expect(Tok::LBracket, "[")?;
                if !self.eat(&Tok::RBracket) {
                    loop {
                        let (fname, _) = self.expect_atom("function name")?;
                        self.expect(Tok::Slash, "/")?;
                        let arity = self.expect_int()? as usize;
                        m.exports.push((fname, arity));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RBracket, "]")?;
                }
                self.expect(Tok::RParen, ")")?;
            }
            "spec" => {
                let (fname, _) = self.expect_atom("function name")?;
                self.expect(Tok::LParen, "(")?;
                let mut types = Vec::new();
                if self.peek() != &Tok::RParen {
                    loop {
                        types.push(self.param_type()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, ")")?;
                self.expect(Tok::Arrow, "->")?;
                self.param_type()?; // return type, unused
                specs.push((fname, types.len(), types));
            }
            _ => return self.unexpected(&["module", "export", "spec"])?,
        }
        self.expect(Tok::Dot, ".")?;
        Ok(())
    }

    fn param_type(&mut self) -> Result<ParamType, ParseError> {
        match self.peek().clone() {
            Tok::Atom(name) => {
                self.bump();
                self.expect(Tok::LParen, "(")?;
                self.expect(Tok::RParen, ")")?;
                match name.as_str() {
                    "integer" => Ok(ParamType::Integer),
                    "atom" => Ok(ParamType::Atom),
                    "any" => Ok(ParamType::Any),
                    _ => self.unexpected(&["integer()", "atom()", "any()"]),
                }
            }
            Tok::LBracket => {
                self.bump();
                let inner = self.param_type()?;
                self.expect(Tok::RBracket, "]")?;
                Ok(ParamType::List(Box::new(inner)))
            }
            Tok::LBrace => {
                self.bump();
                let mut items = Vec::new();
                if self.peek() != &Tok::RBrace {
                    loop {
                        items.push(self.param_type()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBrace, "}")?;
                Ok(ParamType::Tuple(items))
            }
            _ => self.unexpected(&["type"]),
        }
    }

    fn fundef(&mut self) -> Result<FunDef, ParseError> {
        let mut clauses = Vec::new();
        let (first_name, first_tok) = self.expect_atom("function name")?;
        let mut def = FunDef {
            name: first_name.clone(),
            arity: 0,
            clauses: Vec::new(),
            spec: None,
            line: first_tok.line,
        };
        let mut name = first_name;
        loop {
            let clause = self.fun_clause()?;
            if clauses.is_empty() {
                def.arity = clause.patterns.len();
            } else if clause.patterns.len() != def.arity {
                return Err(ParseError::ClauseArityMismatch { name, line: clause.line });
            }
            clauses.push(clause);
            if self.eat(&Tok::Semi) {
                let (next_name, tok) = self.expect_atom("function name")?;
                if next_name != def.name {
                    return Err(ParseError::ClauseNameMismatch {
                        name: next_name,
                        expected: def.name,
                        line: tok.line,
                    });
                }
                name = next_name;
            } else {
                self.expect(Tok::Dot, ". or ;")?;
                break;
            }
        }
        def.clauses = clauses;
        Ok(def)
    }

    fn fun_clause(&mut self) -> Result<Clause, ParseError> {
        let line = self.here().0;
        self.expect(Tok::LParen, "(")?;
        let patterns = self.pattern_list(Tok::RParen)?;
        self.expect(Tok::RParen, ")")?;
        let guard = if self.eat(&Tok::When) { self.guard_seq()? } else { Vec::new() };
        self.expect(Tok::Arrow, "->")?;
        let body = self.expr_seq()?;
        Ok(Clause { patterns, guard, body, line })
    }

    fn pattern_list(&mut self, terminator: Tok) -> Result<Vec<Pattern>, ParseError> {
        let mut out = Vec::new();
        if self.peek() == &terminator {
            return Ok(out);
        }
        loop {
            out.push(self.pattern()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn pattern(&mut self) -> Result<Pattern, ParseError> {
        let e = self.expr()?;
        self.to_pattern(e)
    }

    fn to_pattern(&self, e: Expr) -> Result<Pattern, ParseError> {
        let pos = e.pos();
        let fail = || ParseError::InvalidPattern { line: pos.line, column: pos.column };
        Ok(match e {
            Expr::Int { value, .. } => Pattern::Int(value),
            Expr::Atom { name, .. } => Pattern::Atom(name),
            Expr::Str { codes, .. } => {
                Pattern::List(codes.into_iter().map(Pattern::Int).collect(), None)
            }
            Expr::Var { name, .. } => {
                if name == "_" {
                    Pattern::Wildcard
                } else {
                    Pattern::Var(name)
                }
            }
            Expr::UnOp { op: UnOp::Neg, operand, .. } => match *operand {
                Expr::Int { value, .. } => Pattern::Int(-value),
                _ => return Err(fail()),
            },
            Expr::List { items, tail, .. } => {
                let items = items
                    .into_iter()
                    .map(|e| self.to_pattern(e))
                    .collect::<Result<Vec<_>, _>>()?;
                let tail = match tail {
                    Some(t) => Some(Box::new(self.to_pattern(*t)?)),
                    None => None,
                };
                Pattern::List(items, tail)
            }
            Expr::Tuple { items, .. } => Pattern::Tuple(
                items.into_iter().map(|e| self.to_pattern(e)).collect::<Result<Vec<_>, _>>()?,
            ),
            _ => return Err(fail()),
        })
    }

    fn guard_seq(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut out = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            out.push(self.expr()?);
        }
        Ok(out)
    }

    fn expr_seq(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut out = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            out.push(self.expr()?);
        }
        Ok(out)
    }

    /// Full expression: match level (right-associative `P = E`), with the
    /// `tracer ! {..}` send form handled here as well.
    fn expr(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Atom(a) if a == "tracer") && self.peek2() == &Tok::Bang {
            return self.trace_emit();
        }
        let lhs = self.orelse_expr()?;
        if self.peek() == &Tok::Match_ {
            let pos = lhs.pos();
            self.bump();
            let pattern = self.to_pattern(lhs)?;
            let value = Box::new(self.expr()?);
            return Ok(Expr::Match { pattern, value, pos });
        }
        Ok(lhs)
    }

    fn orelse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.andalso_expr()?;
        while self.peek() == &Tok::OrElse {
            let pos = lhs.pos();
            self.bump();
            let rhs = self.andalso_expr()?;
            lhs = Expr::BinOp { op: BinOp::OrElse, lhs: Box::new(lhs), rhs: Box::new(rhs), pos };
        }
        Ok(lhs)
    }

    fn andalso_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while self.peek() == &Tok::AndAlso {
            let pos = lhs.pos();
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Expr::BinOp { op: BinOp::AndAlso, lhs: Box::new(lhs), rhs: Box::new(rhs), pos };
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.append_expr()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::Neq => BinOp::Neq,
            Tok::Lt => BinOp::Lt,
            Tok::Gt => BinOp::Gt,
            Tok::Le => BinOp::Le,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        let pos = lhs.pos();
        self.bump();
        let rhs = self.append_expr()?;
        Ok(Expr::BinOp { op, lhs: Box::new(lhs), rhs: Box::new(rhs), pos })
    }

    fn append_expr(&mut self) -> Result<Expr, ParseError> {
        // `++` is right-associative.
        let lhs = self.add_expr()?;
        if self.peek() == &Tok::PlusPlus {
            let pos = lhs.pos();
            self.bump();
            let rhs = self.append_expr()?;
            return Ok(Expr::BinOp {
                op: BinOp::Append,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                pos,
            });
        }
        Ok(lhs)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = lhs.pos();
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::BinOp { op, lhs: Box::new(lhs), rhs: Box::new(rhs), pos };
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Div => BinOp::Div,
                Tok::Rem => BinOp::Rem,
                _ => return Ok(lhs),
            };
            let pos = lhs.pos();
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr::BinOp { op, lhs: Box::new(lhs), rhs: Box::new(rhs), pos };
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Minus => {
                let (line, column) = self.here();
                self.bump();
                let operand = Box::new(self.unary_expr()?);
                Ok(Expr::UnOp { op: UnOp::Neg, operand, pos: SourcePos::new(line, column) })
            }
            Tok::Not => {
                let (line, column) = self.here();
                self.bump();
                let operand = Box::new(self.unary_expr()?);
                Ok(Expr::UnOp { op: UnOp::Not, operand, pos: SourcePos::new(line, column) })
            }
            _ => self.call_expr(),
        }
    }

    /// Primary expression plus any postfix call argument lists.
    fn call_expr(&mut self) -> Result<Expr, ParseError> {
        let (line, column) = self.here();
        // Atom heads are special: `f(..)`, `m:f(..)`, or a plain atom.
        if let Tok::Atom(name) = self.peek().clone() {
            let pos = SourcePos::new(line, column);
            if self.peek2() == &Tok::Colon {
                // Qualified call `m:f(..)`; requires the argument list.
                self.bump();
                self.bump();
                let (fname, _) = self.expect_atom("function name")?;
                self.expect(Tok::LParen, "(")?;
                let args = self.call_args()?;
                let call = Expr::Call { target: CallTarget::Qualified(name, fname), args, pos };
                return self.postfix_calls(call);
            }
            if self.peek2() == &Tok::LParen {
                self.bump();
                self.bump();
                let args = self.call_args()?;
                let call = Expr::Call { target: CallTarget::Local(name), args, pos };
                return self.postfix_calls(call);
            }
            self.bump();
            return Ok(Expr::Atom { name, pos });
        }
        let primary = self.primary_expr()?;
        self.postfix_calls(primary)
    }

    fn postfix_calls(&mut self, mut e: Expr) -> Result<Expr, ParseError> {
        while self.peek() == &Tok::LParen {
            let pos = e.pos();
            self.bump();
            let args = self.call_args()?;
            e = Expr::Call { target: CallTarget::Dynamic(Box::new(e)), args, pos };
        }
        Ok(e)
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen, ")")?;
        Ok(args)
    }

    fn primary_expr(&mut self) -> Result<Expr, ParseError> {
        let (line, column) = self.here();
        let pos = SourcePos::new(line, column);
        match self.peek().clone() {
            Tok::Int(value) => {
                self.bump();
                Ok(Expr::Int { value, pos })
            }
            Tok::Char(code) => {
                self.bump();
                Ok(Expr::Int { value: code, pos })
            }
            Tok::Str(codes) => {
                self.bump();
                Ok(Expr::Str { codes, pos })
            }
            Tok::Var(name) => {
                self.bump();
                if name.starts_with(RESERVED_VAR_PREFIX) && !self.options.allow_reserved_vars {
                    return Err(ParseError::ReservedVariable { name, line, column });
                }
                Ok(Expr::Var { name, pos })
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, ")")?;
                Ok(e)
            }
            Tok::LBrace => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RBrace, "}")?;
                }
                Ok(Expr::Tuple { items, pos })
            }
            Tok::LBracket => self.list_or_comprehension(pos),
            Tok::Begin => {
                self.bump();
                let body = self.expr_seq()?;
                self.expect(Tok::End, "end")?;
                Ok(Expr::Block { body, origin: BlockOrigin::Plain, pos })
            }
            Tok::Case => {
                self.bump();
                let scrutinee = Box::new(self.expr()?);
                self.expect(Tok::Of, "of")?;
                let mut clauses = Vec::new();
                loop {
                    let cl_line = self.here().0;
                    let pattern = self.pattern()?;
                    let guard = if self.eat(&Tok::When) { self.guard_seq()? } else { Vec::new() };
                    self.expect(Tok::Arrow, "->")?;
                    let body = self.expr_seq()?;
                    clauses.push(Clause { patterns: vec![pattern], guard, body, line: cl_line });
                    if !self.eat(&Tok::Semi) {
                        break;
                    }
                }
                self.expect(Tok::End, "end")?;
                Ok(Expr::Case { scrutinee, clauses, pos })
            }
            Tok::If => {
                self.bump();
                let mut clauses = Vec::new();
                loop {
                    let guard = self.guard_seq()?;
                    self.expect(Tok::Arrow, "->")?;
                    let body = self.expr_seq()?;
                    clauses.push((guard, body));
                    if !self.eat(&Tok::Semi) {
                        break;
                    }
                }
                self.expect(Tok::End, "end")?;
                Ok(Expr::If { clauses, pos })
            }
            Tok::Fun => {
                self.bump();
                match self.peek().clone() {
                    Tok::Atom(name) => {
                        self.bump();
                        let (module, fname) = if self.eat(&Tok::Colon) {
                            let (f, _) = self.expect_atom("function name")?;
                            (Some(name), f)
                        } else {
                            (None, name)
                        };
                        self.expect(Tok::Slash, "/")?;
                        let arity = self.expect_int()? as usize;
                        Ok(Expr::FunByName { module, name: fname, arity, pos })
                    }
                    Tok::LParen => {
                        let mut clauses = Vec::new();
                        loop {
                            let cl_line = self.here().0;
                            self.expect(Tok::LParen, "(")?;
                            let patterns = self.pattern_list(Tok::RParen)?;
                            self.expect(Tok::RParen, ")")?;
                            let guard =
                                if self.eat(&Tok::When) { self.guard_seq()? } else { Vec::new() };
                            self.expect(Tok::Arrow, "->")?;
                            let body = self.expr_seq()?;
                            clauses.push(Clause { patterns, guard, body, line: cl_line });
                            if !self.eat(&Tok::Semi) {
                                break;
                            }
                        }
                        self.expect(Tok::End, "end")?;
                        Ok(Expr::Lambda { lambda: Lambda { clauses }, pos })
                    }
                    _ => self.unexpected(&["function name", "("]),
                }
            }
            Tok::Try => {
                self.bump();
                let body = self.expr_seq()?;
                self.expect(Tok::Catch, "catch")?;
                let mut handlers = Vec::new();
                loop {
                    let class = self.pattern()?;
                    self.expect(Tok::Colon, ":")?;
                    let reason = self.pattern()?;
                    self.expect(Tok::Arrow, "->")?;
                    let hbody = self.expr_seq()?;
                    handlers.push(CatchClause { class, reason, body: hbody });
                    if !self.eat(&Tok::Semi) {
                        break;
                    }
                }
                self.expect(Tok::End, "end")?;
                Ok(Expr::Try { body, handlers, pos })
            }
            _ => self.unexpected(&["expression"]),
        }
    }

    fn list_or_comprehension(&mut self, pos: SourcePos) -> Result<Expr, ParseError> {
        self.expect(Tok::LBracket, "[")?;
        if self.eat(&Tok::RBracket) {
            return Ok(Expr::List { items: Vec::new(), tail: None, pos });
        }
        let first = self.expr()?;
        if self.eat(&Tok::BarBar) {
            let mut qualifiers = Vec::new();
            loop {
                qualifiers.push(self.qualifier()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBracket, "]")?;
            return Ok(Expr::Lc { head: Box::new(first), qualifiers, pos });
        }
        let mut items = vec![first];
        let mut tail = None;
        loop {
            if self.eat(&Tok::Comma) {
                items.push(self.expr()?);
            } else if self.eat(&Tok::Bar) {
                tail = Some(Box::new(self.expr()?));
                break;
            } else {
                break;
            }
        }
        self.expect(Tok::RBracket, "]")?;
        Ok(Expr::List { items, tail, pos })
    }

    fn qualifier(&mut self) -> Result<Qualifier, ParseError> {
        let e = self.expr()?;
        if self.eat(&Tok::LeftArrow) {
            let pattern = self.to_pattern(e)?;
            let source = self.expr()?;
            return Ok(Qualifier::Generator { pattern, source });
        }
        Ok(Qualifier::Filter(e))
    }

    /// `tracer ! {add, POI, V}` and the other event templates.
    fn trace_emit(&mut self) -> Result<Expr, ParseError> {
        let (line, column) = self.here();
        let pos = SourcePos::new(line, column);
        self.bump(); // tracer
        self.expect(Tok::Bang, "!")?;
        self.expect(Tok::LBrace, "{")?;
        let (tag, _) = self.expect_atom("event tag")?;
        self.expect(Tok::Comma, ",")?;
        let spec = match tag.as_str() {
            "add_i" => {
                let poi = self.poi_literal()?;
                self.expect(Tok::Comma, ",")?;
                let ref_expr = Box::new(self.expr()?);
                self.expect(Tok::Comma, ",")?;
                let value = Box::new(self.expr()?);
                EmitSpec::AddI { poi, ref_expr, value }
            }
            "add" => {
                let poi = self.poi_literal()?;
                self.expect(Tok::Comma, ",")?;
                let first = Box::new(self.expr()?);
                if self.eat(&Tok::Comma) {
                    let value = Box::new(self.expr()?);
                    EmitSpec::AddRef { poi, ref_expr: first, value }
                } else {
                    EmitSpec::Add { poi, value: first }
                }
            }
            "begin" => {
                let ref_expr = Box::new(self.expr()?);
                self.expect(Tok::Comma, ",")?;
                let frame = self.frame_literal()?;
                EmitSpec::Begin { ref_expr, frame }
            }
            "end" => {
                let ref_expr = Box::new(self.expr()?);
                EmitSpec::End { ref_expr }
            }
            _ => return self.unexpected(&["add", "add_i", "'begin'", "'end'"]),
        };
        self.expect(Tok::RBrace, "}")?;
        Ok(Expr::TraceEmit { spec, pos })
    }

    fn poi_literal(&mut self) -> Result<Poi, ParseError> {
        self.expect(Tok::LBrace, "{")?;
        let (module, _) = self.expect_atom("module name")?;
        self.expect(Tok::Comma, ",")?;
        let lno = self.expect_int()? as u32;
        self.expect(Tok::Comma, ",")?;
        let kind = self.poi_kind()?;
        let occurrence = if self.eat(&Tok::Comma) { self.expect_int()? as u32 } else { 1 };
        self.expect(Tok::RBrace, "}")?;
        Ok(Poi { module, line: lno, kind, occurrence })
    }

    fn poi_kind(&mut self) -> Result<PoiKind, ParseError> {
        match self.peek().clone() {
            Tok::Atom(name) => {
                self.bump();
                PoiKind::from_atom(&name)
                    .ok_or(())
                    .or_else(|_| self.unexpected(&["POI kind"]))
            }
            Tok::Case => {
                self.bump();
                Ok(PoiKind::Case)
            }
            Tok::If => {
                self.bump();
                Ok(PoiKind::If)
            }
            Tok::Fun => {
                self.bump();
                Ok(PoiKind::Fun)
            }
            Tok::Try => {
                self.bump();
                Ok(PoiKind::Try)
            }
            Tok::LBrace => {
                self.bump();
                let (tag, _) = self.expect_atom("var")?;
                if tag != "var" {
                    return self.unexpected(&["var"]);
                }
                self.expect(Tok::Comma, ",")?;
                let (name, _) = match self.peek().clone() {
                    Tok::Atom(a) => {
                        let t = self.bump();
                        (a, t)
                    }
                    Tok::Var(v) => {
                        let t = self.bump();
                        (v, t)
                    }
                    _ => return self.unexpected(&["variable name"]),
                };
                self.expect(Tok::RBrace, "}")?;
                Ok(PoiKind::Var(name))
            }
            _ => self.unexpected(&["POI kind"]),
        }
    }

    fn frame_literal(&mut self) -> Result<Frame, ParseError> {
        self.expect(Tok::LBrace, "{")?;
        let (module, _) = self.expect_atom("module")?;
        self.expect(Tok::Comma, ",")?;
        let (name, _) = self.expect_atom("function")?;
        self.expect(Tok::Comma, ",")?;
        let arity = self.expect_int()? as u32;
        self.expect(Tok::Comma, ",")?;
        self.expect(Tok::LBrace, "{")?;
        let (tag, _) = self.expect_atom("line")?;
        if tag != "line" {
            return self.unexpected(&["line"]);
        }
        self.expect(Tok::Comma, ",")?;
        let lno = self.expect_int()? as u32;
        self.expect(Tok::RBrace, "}")?;
        self.expect(Tok::RBrace, "}")?;
        // Frame origin is not part of the printed form; call-site is the
        // common case for hand-written emits.
        Ok(Frame { module, name, arity, line: lno, kind: FrameKind::CallSite })
    }
}
