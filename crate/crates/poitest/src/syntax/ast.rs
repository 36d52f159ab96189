//! Position-indexed AST for MiniFun.
//!
//! Every expression node carries a [`SourcePos`] whose `node_id` is assigned
//! by a preorder numbering pass at parse time. Instrumentation allocates
//! fresh node ids above the parse-time maximum and copies the position of the
//! expression it wraps.

use crate::poi::{Frame, Poi, PoiKind};

/// Unique id of an expression node within one module.
pub type ExprId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourcePos {
    pub line: u32,
    pub column: u32,
    pub node_id: ExprId,
}

impl SourcePos {
    pub fn new(line: u32, column: u32) -> SourcePos {
        SourcePos { line, column, node_id: 0 }
    }
}

/// A parsed MiniFun module.
#[derive(Debug, Clone)]
pub struct SourceModule {
    pub name: String,
    pub source_path: String,
    pub exports: Vec<(String, usize)>,
    pub functions: Vec<FunDef>,
    /// Highest node id assigned by the parser; instrumentation continues above.
    pub max_node_id: ExprId,
    /// Set once POI instrumentation has been applied.
    pub poi_instrumented: bool,
    /// Set once stack-trace instrumentation has been applied.
    pub stack_instrumented: bool,
}

impl SourceModule {
    /// Find a function definition by name and arity.
    pub fn function(&self, name: &str, arity: usize) -> Option<&FunDef> {
        self.functions.iter().find(|f| f.name == name && f.arity == arity)
    }
}

#[derive(Debug, Clone)]
pub struct FunDef {
    pub name: String,
    pub arity: usize,
    pub clauses: Vec<Clause>,
    /// Parameter types from an optional `-spec` attribute.
    pub spec: Option<Vec<ParamType>>,
    pub line: u32,
}

/// One clause of a named function or a lambda.
#[derive(Debug, Clone)]
pub struct Clause {
    pub patterns: Vec<Pattern>,
    /// Guard conjunction; empty means no guard.
    pub guard: Vec<Expr>,
    pub body: Vec<Expr>,
    pub line: u32,
}

/// Parameter type as written in `-spec` attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamType {
    Integer,
    Atom,
    Any,
    List(Box<ParamType>),
    Tuple(Vec<ParamType>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Wildcard,
    Var(String),
    Int(i64),
    Atom(String),
    /// Fixed elements plus an optional tail pattern (`[H | T]`).
    List(Vec<Pattern>, Option<Box<Pattern>>),
    Tuple(Vec<Pattern>),
}

impl Pattern {
    /// Variables bound by this pattern, in left-to-right order.
    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Var(v) => out.push(v.clone()),
            Pattern::List(items, tail) => {
                for p in items {
                    p.variables(out);
                }
                if let Some(t) = tail {
                    t.variables(out);
                }
            }
            Pattern::Tuple(items) => {
                for p in items {
                    p.variables(out);
                }
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Append,
    Eq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
    AndAlso,
    OrElse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

/// Call target of a call expression.
#[derive(Debug, Clone)]
pub enum CallTarget {
    /// `f(..)` resolved in the current module, then in the builtins.
    Local(String),
    /// `m:f(..)`.
    Qualified(String, String),
    /// `E(..)` where `E` evaluates to a callable value.
    Dynamic(Box<Expr>),
}

/// Why a `begin .. end` block exists; `Plain` for source-level blocks.
///
/// Instrumentation marks the blocks it introduces so later passes can
/// recognise them without guessing from shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockOrigin {
    Plain,
    /// Value tracing wrapper around a non-call expression.
    PoiValue,
    /// Value tracing wrapper around a call expression.
    PoiValueCall,
    /// Enhanced call tracing wrapper.
    PoiCall,
    /// AIT-variant call tracing wrapper.
    PoiAitCall,
    /// Stack begin/end wrapper.
    StackFrame,
}

/// Trace event template embedded in instrumented code.
///
/// Prints as `tracer ! {..}` and parses back, so instrumented modules remain
/// legal MiniFun.
#[derive(Debug, Clone)]
pub enum EmitSpec {
    Add { poi: Poi, value: Box<Expr> },
    AddRef { poi: Poi, ref_expr: Box<Expr>, value: Box<Expr> },
    AddI { poi: Poi, ref_expr: Box<Expr>, value: Box<Expr> },
    Begin { ref_expr: Box<Expr>, frame: Frame },
    End { ref_expr: Box<Expr> },
}

#[derive(Debug, Clone)]
pub struct Lambda {
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone)]
pub enum Qualifier {
    Generator { pattern: Pattern, source: Expr },
    Filter(Expr),
}

#[derive(Debug, Clone)]
pub struct CatchClause {
    pub class: Pattern,
    pub reason: Pattern,
    pub body: Vec<Expr>,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Int { value: i64, pos: SourcePos },
    Atom { name: String, pos: SourcePos },
    /// String literal kept as its character codes.
    Str { codes: Vec<i64>, pos: SourcePos },
    Var { name: String, pos: SourcePos },
    List { items: Vec<Expr>, tail: Option<Box<Expr>>, pos: SourcePos },
    Tuple { items: Vec<Expr>, pos: SourcePos },
    BinOp { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, pos: SourcePos },
    UnOp { op: UnOp, operand: Box<Expr>, pos: SourcePos },
    Call { target: CallTarget, args: Vec<Expr>, pos: SourcePos },
    /// `fun f/2` or `fun m:f/2`.
    FunByName { module: Option<String>, name: String, arity: usize, pos: SourcePos },
    Lambda { lambda: Lambda, pos: SourcePos },
    Case { scrutinee: Box<Expr>, clauses: Vec<Clause>, pos: SourcePos },
    If { clauses: Vec<(Vec<Expr>, Vec<Expr>)>, pos: SourcePos },
    Match { pattern: Pattern, value: Box<Expr>, pos: SourcePos },
    Lc { head: Box<Expr>, qualifiers: Vec<Qualifier>, pos: SourcePos },
    Try { body: Vec<Expr>, handlers: Vec<CatchClause>, pos: SourcePos },
    Block { body: Vec<Expr>, origin: BlockOrigin, pos: SourcePos },
    TraceEmit { spec: EmitSpec, pos: SourcePos },
}

impl Expr {
    pub fn pos(&self) -> SourcePos {
        match self {
            Expr::Int { pos, .. }
            | Expr::Atom { pos, .. }
            | Expr::Str { pos, .. }
            | Expr::Var { pos, .. }
            | Expr::List { pos, .. }
            | Expr::Tuple { pos, .. }
            | Expr::BinOp { pos, .. }
            | Expr::UnOp { pos, .. }
            | Expr::Call { pos, .. }
            | Expr::FunByName { pos, .. }
            | Expr::Lambda { pos, .. }
            | Expr::Case { pos, .. }
            | Expr::If { pos, .. }
            | Expr::Match { pos, .. }
            | Expr::Lc { pos, .. }
            | Expr::Try { pos, .. }
            | Expr::Block { pos, .. }
            | Expr::TraceEmit { pos, .. } => *pos,
        }
    }

    pub fn pos_mut(&mut self) -> &mut SourcePos {
        match self {
            Expr::Int { pos, .. }
            | Expr::Atom { pos, .. }
            | Expr::Str { pos, .. }
            | Expr::Var { pos, .. }
            | Expr::List { pos, .. }
            | Expr::Tuple { pos, .. }
            | Expr::BinOp { pos, .. }
            | Expr::UnOp { pos, .. }
            | Expr::Call { pos, .. }
            | Expr::FunByName { pos, .. }
            | Expr::Lambda { pos, .. }
            | Expr::Case { pos, .. }
            | Expr::If { pos, .. }
            | Expr::Match { pos, .. }
            | Expr::Lc { pos, .. }
            | Expr::Try { pos, .. }
            | Expr::Block { pos, .. }
            | Expr::TraceEmit { pos, .. } => pos,
        }
    }

    /// The POI kind tag of this node, if the node can be a POI.
    pub fn poi_kind(&self) -> Option<PoiKind> {
        Some(match self {
            Expr::Int { .. } => PoiKind::Integer,
            Expr::Atom { .. } => PoiKind::Atom,
            Expr::Str { .. } => PoiKind::String,
            Expr::Var { name, .. } => PoiKind::Var(name.clone()),
            Expr::List { .. } => PoiKind::List,
            Expr::Tuple { .. } => PoiKind::Tuple,
            Expr::BinOp { .. } | Expr::UnOp { .. } => PoiKind::Op,
            Expr::Call { .. } => PoiKind::Call,
            Expr::FunByName { .. } | Expr::Lambda { .. } => PoiKind::Fun,
            Expr::Case { .. } => PoiKind::Case,
            Expr::If { .. } => PoiKind::If,
            Expr::Match { .. } => PoiKind::Match,
            Expr::Lc { .. } => PoiKind::Lc,
            Expr::Try { .. } => PoiKind::Try,
            Expr::Block { .. } | Expr::TraceEmit { .. } => return None,
        })
    }

    /// Visit this node and all child expressions in preorder.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Int { .. }
            | Expr::Atom { .. }
            | Expr::Str { .. }
            | Expr::Var { .. }
            | Expr::FunByName { .. } => {}
            Expr::List { items, tail, .. } => {
                for e in items {
                    e.walk(f);
                }
                if let Some(t) = tail {
                    t.walk(f);
                }
            }
            Expr::Tuple { items, .. } => {
                for e in items {
                    e.walk(f);
                }
            }
            Expr::BinOp { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::UnOp { operand, .. } => operand.walk(f),
            Expr::Call { target, args, .. } => {
                if let CallTarget::Dynamic(e) = target {
                    e.walk(f);
                }
                for a in args {
                    a.walk(f);
                }
            }
            Expr::Lambda { lambda, .. } => {
                for c in &lambda.clauses {
                    for e in c.guard.iter().chain(&c.body) {
                        e.walk(f);
                    }
                }
            }
            Expr::Case { scrutinee, clauses, .. } => {
                scrutinee.walk(f);
                for c in clauses {
                    for e in c.guard.iter().chain(&c.body) {
                        e.walk(f);
                    }
                }
            }
            Expr::If { clauses, .. } => {
                for (guard, body) in clauses {
                    for e in guard.iter().chain(body) {
                        e.walk(f);
                    }
                }
            }
            Expr::Match { value, .. } => value.walk(f),
            Expr::Lc { head, qualifiers, .. } => {
                head.walk(f);
                for q in qualifiers {
                    match q {
                        Qualifier::Generator { source, .. } => source.walk(f),
                        Qualifier::Filter(e) => e.walk(f),
                    }
                }
            }
            Expr::Try { body, handlers, .. } => {
                for e in body {
                    e.walk(f);
                }
                for h in handlers {
                    for e in &h.body {
                        e.walk(f);
                    }
                }
            }
            Expr::Block { body, .. } => {
                for e in body {
                    e.walk(f);
                }
            }
            Expr::TraceEmit { spec, .. } => match spec {
                EmitSpec::Add { value, .. } => value.walk(f),
                EmitSpec::AddRef { ref_expr, value, .. } | EmitSpec::AddI { ref_expr, value, .. } => {
                    ref_expr.walk(f);
                    value.walk(f);
                }
                EmitSpec::Begin { ref_expr, .. } | EmitSpec::End { ref_expr } => ref_expr.walk(f),
            },
        }
    }
}

/// Visit every expression of the module in preorder.
pub fn walk_module<'a>(m: &'a SourceModule, f: &mut impl FnMut(&'a Expr)) {
    for fun in &m.functions {
        for clause in &fun.clauses {
            for e in clause.guard.iter().chain(&clause.body) {
                e.walk(f);
            }
        }
    }
}

/// All node ids of expressions of the given kind on `line`, ordered by the
/// column of their first token (occurrence order).
///
/// Expressions spanning several lines are attributed to the line of their
/// first token. The result is empty when nothing matches; POI resolution
/// turns that into an error.
pub fn find_expressions(m: &SourceModule, line: u32, kind: &PoiKind) -> Vec<ExprId> {
    let mut hits: Vec<(u32, ExprId)> = Vec::new();
    walk_module(m, &mut |e| {
        let pos = e.pos();
        if pos.line == line && e.poi_kind().as_ref() == Some(kind) {
            hits.push((pos.column, pos.node_id));
        }
    });
    hits.sort();
    hits.into_iter().map(|(_, id)| id).collect()
}

/// Assign preorder node ids to every expression, returning the maximum.
pub(crate) fn number_module(m: &mut SourceModule) -> ExprId {
    let mut next: ExprId = 0;
    for fun in &mut m.functions {
        for clause in &mut fun.clauses {
            for e in clause.guard.iter_mut().chain(clause.body.iter_mut()) {
                number_expr(e, &mut next);
            }
        }
    }
    m.max_node_id = next;
    next
}

fn number_expr(e: &mut Expr, next: &mut ExprId) {
    e.pos_mut().node_id = *next;
    *next += 1;
    match e {
        Expr::Int { .. }
        | Expr::Atom { .. }
        | Expr::Str { .. }
        | Expr::Var { .. }
        | Expr::FunByName { .. } => {}
        Expr::List { items, tail, .. } => {
            for e in items {
                number_expr(e, next);
            }
            if let Some(t) = tail {
                number_expr(t, next);
            }
        }
        Expr::Tuple { items, .. } => {
            for e in items {
                number_expr(e, next);
            }
        }
        Expr::BinOp { lhs, rhs, .. } => {
            number_expr(lhs, next);
            number_expr(rhs, next);
        }
        Expr::UnOp { operand, .. } => number_expr(operand, next),
        Expr::Call { target, args, .. } => {
            if let CallTarget::Dynamic(e) = target {
                number_expr(e, next);
            }
            for a in args {
                number_expr(a, next);
            }
        }
        Expr::Lambda { lambda, .. } => {
            for c in &mut lambda.clauses {
                for e in c.guard.iter_mut().chain(c.body.iter_mut()) {
                    number_expr(e, next);
                }
            }
        }
        Expr::Case { scrutinee, clauses, .. } => {
            number_expr(scrutinee, next);
            for c in clauses {
                for e in c.guard.iter_mut().chain(c.body.iter_mut()) {
                    number_expr(e, next);
                }
            }
        }
        Expr::If { clauses, .. } => {
            for (guard, body) in clauses {
                for e in guard.iter_mut().chain(body.iter_mut()) {
                    number_expr(e, next);
                }
            }
        }
        Expr::Match { value, .. } => number_expr(value, next),
        Expr::Lc { head, qualifiers, .. } => {
            number_expr(head, next);
            for q in qualifiers {
                match q {
                    Qualifier::Generator { source, .. } => number_expr(source, next),
                    Qualifier::Filter(e) => number_expr(e, next),
                }
            }
        }
        Expr::Try { body, handlers, .. } => {
            for e in body {
                number_expr(e, next);
            }
            for h in handlers {
                for e in &mut h.body {
                    number_expr(e, next);
                }
            }
        }
        Expr::Block { body, .. } => {
            for e in body {
                number_expr(e, next);
            }
        }
        Expr::TraceEmit { spec, .. } => match spec {
            EmitSpec::Add { value, .. } => number_expr(value, next),
            EmitSpec::AddRef { ref_expr, value, .. } | EmitSpec::AddI { ref_expr, value, .. } => {
                number_expr(ref_expr, next);
                number_expr(value, next);
            }
            EmitSpec::Begin { ref_expr, .. } | EmitSpec::End { ref_expr } => {
                number_expr(ref_expr, next)
            }
        },
    }
}
