//! POI resolution and source-to-source instrumentation.
//!
//! Value tracing replaces a POI expression with a block that binds the value
//! to a fresh variable, emits it, and yields it. Call tracing expands a call
//! POI into the block form: bind a fresh reference, evaluate callee and
//! arguments once (left to right) into fresh variables, emit the callee and
//! each argument as `add_i`, perform the call on the bound values, emit the
//! result, yield it. The AIT variant emits the result without the reference.
//!
//! Stack tracing is applied after POI instrumentation. Under the `calls`
//! policy every non-tail call site is wrapped in begin/end events guarded by
//! a try-catch whose handler emits the end event and re-raises, so errors
//! unwind the collected stack exactly like the native one; calls in tail
//! position are left unwrapped, mirroring last-call-optimised stacks. Under
//! the `defs` policy every function clause body is wrapped the same way.
//! Fresh variables use the reserved `__poi_` prefix, which the parser refuses
//! in user code.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::poi::{Frame, FrameKind, Poi, PoiKind};
use crate::syntax::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallMode {
    /// Call POIs trace only their value.
    Standard,
    /// Call POIs also trace callee and arguments into `ca`.
    Enhanced,
    /// Callee and arguments become independent trace elements.
    Ait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackMode {
    Off,
    Calls,
    Defs,
    Both,
}

/// What to instrument and how.
#[derive(Debug, Clone)]
pub struct InstrumentationPlan {
    pub pois: Vec<Poi>,
    pub call_mode: CallMode,
    pub stack_mode: StackMode,
}

impl InstrumentationPlan {
    pub fn new(pois: Vec<Poi>, call_mode: CallMode, stack_mode: StackMode) -> Self {
        InstrumentationPlan { pois, call_mode, stack_mode }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InstrumentError {
    #[error("POI {0} does not name module {1}")]
    ModuleMismatch(Poi, String),
    #[error("no {kind} expression on line {line} of {module}", kind = poi.kind, line = poi.line, module = poi.module)]
    PoiNotFound { poi: Poi },
    #[error("only {found} occurrence(s) of {kind} on line {line}, POI asks for {occ}", kind = poi.kind, line = poi.line, occ = poi.occurrence, found = found)]
    PoiOccurrenceOutOfRange { poi: Poi, found: usize },
    #[error("POI {0} is not a call expression")]
    NotACall(Poi),
    #[error("module {0} is already instrumented")]
    AlreadyInstrumented(String),
    #[error("POI {0} sits in a guard and cannot be instrumented")]
    PoiInGuard(Poi),
}

/// Whether `poi.module` names this module (by name, file name, or path).
pub fn poi_names_module(m: &SourceModule, poi: &Poi) -> bool {
    if poi.module == m.name || poi.module == m.source_path {
        return true;
    }
    let file = m.source_path.rsplit('/').next().unwrap_or(&m.source_path);
    poi.module == file
}

/// Resolve a POI to the node id of its occurrence-th matching expression.
pub fn resolve_poi(m: &SourceModule, poi: &Poi) -> Result<ExprId, InstrumentError> {
    if !poi_names_module(m, poi) {
        return Err(InstrumentError::ModuleMismatch(poi.clone(), m.name.clone()));
    }
    let ids = find_expressions(m, poi.line, &poi.kind);
    if ids.is_empty() {
        return Err(InstrumentError::PoiNotFound { poi: poi.clone() });
    }
    let idx = poi.occurrence as usize;
    if idx == 0 || idx > ids.len() {
        return Err(InstrumentError::PoiOccurrenceOutOfRange { poi: poi.clone(), found: ids.len() });
    }
    Ok(ids[idx - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PoiStyle {
    Value,
    Call,
    AitCall,
}

/// Instrument POIs for plain value tracing.
pub fn instrument_value_pois(m: &SourceModule, pois: &[Poi]) -> Result<SourceModule, InstrumentError> {
    instrument_pois(m, pois.iter().map(|p| (p.clone(), PoiStyle::Value)).collect())
}

/// Instrument call POIs with enhanced call tracing. Every POI must be a call.
pub fn instrument_call_pois(m: &SourceModule, pois: &[Poi]) -> Result<SourceModule, InstrumentError> {
    require_calls(pois)?;
    instrument_pois(m, pois.iter().map(|p| (p.clone(), PoiStyle::Call)).collect())
}

/// Instrument call POIs with AIT-variant tracing (result sent without the
/// group reference). Every POI must be a call.
pub fn instrument_ait_calls(m: &SourceModule, pois: &[Poi]) -> Result<SourceModule, InstrumentError> {
    require_calls(pois)?;
    instrument_pois(m, pois.iter().map(|p| (p.clone(), PoiStyle::AitCall)).collect())
}

fn require_calls(pois: &[Poi]) -> Result<(), InstrumentError> {
    for p in pois {
        if p.kind != PoiKind::Call {
            return Err(InstrumentError::NotACall(p.clone()));
        }
    }
    Ok(())
}

/// Apply a whole plan to one module: POIs naming other modules are ignored,
/// call-kind POIs follow the plan's call mode, and stack instrumentation is
/// layered on afterwards.
pub fn apply_plan(m: &SourceModule, plan: &InstrumentationPlan) -> Result<SourceModule, InstrumentError> {
    let mine: Vec<&Poi> = plan.pois.iter().filter(|p| poi_names_module(m, p)).collect();
    let styled = mine
        .into_iter()
        .map(|p| {
            let style = match (&p.kind, plan.call_mode) {
                (PoiKind::Call, CallMode::Enhanced) => PoiStyle::Call,
                (PoiKind::Call, CallMode::Ait) => PoiStyle::AitCall,
                _ => PoiStyle::Value,
            };
            (p.clone(), style)
        })
        .collect();
    let m = instrument_pois(m, styled)?;
    match plan.stack_mode {
        StackMode::Off => Ok(m),
        mode => instrument_stack_tracing(&m, mode),
    }
}

fn instrument_pois(
    m: &SourceModule,
    pois: Vec<(Poi, PoiStyle)>,
) -> Result<SourceModule, InstrumentError> {
    if m.poi_instrumented || m.stack_instrumented {
        return Err(InstrumentError::AlreadyInstrumented(m.name.clone()));
    }
    let mut targets: BTreeMap<ExprId, (Poi, PoiStyle)> = BTreeMap::new();
    for (poi, style) in pois {
        let id = resolve_poi(m, &poi)?;
        targets.entry(id).or_insert((poi, style));
    }
    let mut out = m.clone();
    let mut rw = Rewriter {
        module_name: m.name.clone(),
        next_var: next_free_var_index(m),
        next_node: m.max_node_id,
    };
    for fun in &mut out.functions {
        for clause in &mut fun.clauses {
            let body = std::mem::take(&mut clause.body);
            clause.body =
                body.into_iter().map(|e| rw.rewrite_poi(e, &mut targets)).collect::<Vec<_>>();
        }
    }
    if let Some((poi, _)) = targets.into_iter().map(|(_, v)| v).next() {
        // A resolved target the body walk never reached sits in a guard.
        return Err(InstrumentError::PoiInGuard(poi));
    }
    out.max_node_id = rw.next_node;
    out.poi_instrumented = true;
    Ok(out)
}

/// Scan for the first fresh-variable index not used in the module.
fn next_free_var_index(m: &SourceModule) -> u32 {
    let mut max: u32 = 0;
    let mut see = |name: &str| {
        if let Some(rest) = name.strip_prefix("__poi_") {
            if let Ok(n) = rest.parse::<u32>() {
                max = max.max(n + 1);
            }
        }
    };
    let mut pat_names = Vec::new();
    for fun in &m.functions {
        for clause in &fun.clauses {
            for p in &clause.patterns {
                p.variables(&mut pat_names);
            }
        }
    }
    crate::syntax::ast::walk_module(m, &mut |e| {
        if let Expr::Var { name, .. } = e {
            see(name);
        }
        if let Expr::Match { pattern, .. } = e {
            pattern.variables(&mut pat_names);
        }
    });
    for name in pat_names {
        see(&name);
    }
    max
}

struct Rewriter {
    module_name: String,
    next_var: u32,
    next_node: ExprId,
}

impl Rewriter {
    fn fresh_var(&mut self) -> String {
        let v = format!("__poi_{}", self.next_var);
        self.next_var += 1;
        v
    }

    fn fresh_pos(&mut self, base: SourcePos) -> SourcePos {
        let pos = SourcePos { line: base.line, column: base.column, node_id: self.next_node };
        self.next_node += 1;
        pos
    }

    fn var(&mut self, name: &str, base: SourcePos) -> Expr {
        Expr::Var { name: name.into(), pos: self.fresh_pos(base) }
    }

    fn make_ref_call(&mut self, base: SourcePos) -> Expr {
        Expr::Call {
            target: CallTarget::Qualified("erlang".into(), "make_ref".into()),
            args: vec![],
            pos: self.fresh_pos(base),
        }
    }

    fn bind(&mut self, name: &str, value: Expr, base: SourcePos) -> Expr {
        Expr::Match {
            pattern: Pattern::Var(name.into()),
            value: Box::new(value),
            pos: self.fresh_pos(base),
        }
    }

    /// Innermost-first: children are rewritten before the node itself is
    /// wrapped, so an outer POI wraps the instrumented inner one and
    /// argument expressions are still evaluated exactly once.
    fn rewrite_poi(&mut self, e: Expr, targets: &mut BTreeMap<ExprId, (Poi, PoiStyle)>) -> Expr {
        let id = e.pos().node_id;
        let e = self.map_children(e, &mut |rw, child| rw.rewrite_poi(child, targets));
        match targets.remove(&id) {
            None => e,
            Some((poi, PoiStyle::Value)) => self.wrap_value(e, poi),
            Some((poi, style)) => self.wrap_call(e, poi, style == PoiStyle::AitCall),
        }
    }

    fn wrap_value(&mut self, e: Expr, poi: Poi) -> Expr {
        let base = e.pos();
        let origin = if matches!(e, Expr::Call { .. }) {
            BlockOrigin::PoiValueCall
        } else {
            BlockOrigin::PoiValue
        };
        let v = self.fresh_var();
        let bind = self.bind(&v, e, base);
        let emit = Expr::TraceEmit {
            spec: EmitSpec::Add { poi, value: Box::new(self.var(&v, base)) },
            pos: self.fresh_pos(base),
        };
        let result = self.var(&v, base);
        Expr::Block { body: vec![bind, emit, result], origin, pos: self.fresh_pos(base) }
    }

    fn wrap_call(&mut self, e: Expr, poi: Poi, ait: bool) -> Expr {
        let (target, args, base) = match e {
            Expr::Call { target, args, pos } => (target, args, pos),
            other => {
                // Kind checks make this unreachable for resolved call POIs.
                return self.wrap_value(other, poi);
            }
        };
        let callee_expr = self.callee_expr(target, args.len(), base);
        let rv = self.fresh_var();
        let cv = self.fresh_var();
        let avs: Vec<String> = (0..args.len()).map(|_| self.fresh_var()).collect();

        let mut body = Vec::new();
        let mk = self.make_ref_call(base);
        body.push(self.bind(&rv, mk, base));
        body.push(self.bind(&cv, callee_expr, base));
        for (name, arg) in avs.iter().zip(args) {
            body.push(self.bind(name, arg, base));
        }
        let callee_emit = Expr::TraceEmit {
            spec: EmitSpec::AddI {
                poi: poi.clone(),
                ref_expr: Box::new(self.var(&rv, base)),
                value: Box::new(self.var(&cv, base)),
            },
            pos: self.fresh_pos(base),
        };
        body.push(callee_emit);
        for name in &avs {
            body.push(Expr::TraceEmit {
                spec: EmitSpec::AddI {
                    poi: poi.clone(),
                    ref_expr: Box::new(self.var(&rv, base)),
                    value: Box::new(self.var(name, base)),
                },
                pos: self.fresh_pos(base),
            });
        }
        let vv = self.fresh_var();
        let callee_var = self.var(&cv, base);
        let arg_vars: Vec<Expr> = avs.iter().map(|n| self.var(n, base)).collect();
        let call = Expr::Call {
            target: CallTarget::Dynamic(Box::new(callee_var)),
            args: arg_vars,
            pos: self.fresh_pos(base),
        };
        body.push(self.bind(&vv, call, base));
        let result_spec = if ait {
            EmitSpec::Add { poi: poi.clone(), value: Box::new(self.var(&vv, base)) }
        } else {
            EmitSpec::AddRef {
                poi: poi.clone(),
                ref_expr: Box::new(self.var(&rv, base)),
                value: Box::new(self.var(&vv, base)),
            }
        };
        body.push(Expr::TraceEmit { spec: result_spec, pos: self.fresh_pos(base) });
        body.push(self.var(&vv, base));
        let origin = if ait { BlockOrigin::PoiAitCall } else { BlockOrigin::PoiCall };
        Expr::Block { body, origin, pos: self.fresh_pos(base) }
    }

    /// Expression whose value denotes the callee: atoms resolve in the
    /// current module first, qualified names become function references.
    fn callee_expr(&mut self, target: CallTarget, arity: usize, base: SourcePos) -> Expr {
        match target {
            CallTarget::Local(name) => Expr::Atom { name, pos: self.fresh_pos(base) },
            CallTarget::Qualified(module, name) => {
                Expr::FunByName { module: Some(module), name, arity, pos: self.fresh_pos(base) }
            }
            CallTarget::Dynamic(e) => *e,
        }
    }

    /// Rebuild `e` with every direct child expression mapped through `f`.
    fn map_children(&mut self, e: Expr, f: &mut impl FnMut(&mut Self, Expr) -> Expr) -> Expr {
        let map_vec = |rw: &mut Self, v: Vec<Expr>, f: &mut dyn FnMut(&mut Self, Expr) -> Expr| {
            v.into_iter().map(|e| f(rw, e)).collect::<Vec<_>>()
        };
        match e {
            Expr::Int { .. }
            | Expr::Atom { .. }
            | Expr::Str { .. }
            | Expr::Var { .. }
            | Expr::FunByName { .. } => e,
            Expr::List { items, tail, pos } => Expr::List {
                items: map_vec(self, items, f),
                tail: tail.map(|t| Box::new(f(self, *t))),
                pos,
            },
            Expr::Tuple { items, pos } => Expr::Tuple { items: map_vec(self, items, f), pos },
            Expr::BinOp { op, lhs, rhs, pos } => Expr::BinOp {
                op,
                lhs: Box::new(f(self, *lhs)),
                rhs: Box::new(f(self, *rhs)),
                pos,
            },
            Expr::UnOp { op, operand, pos } => {
                Expr::UnOp { op, operand: Box::new(f(self, *operand)), pos }
            }
            Expr::Call { target, args, pos } => {
                let target = match target {
                    CallTarget::Dynamic(e) => CallTarget::Dynamic(Box::new(f(self, *e))),
                    other => other,
                };
                Expr::Call { target, args: map_vec(self, args, f), pos }
            }
            Expr::Lambda { mut lambda, pos } => {
                for c in &mut lambda.clauses {
                    let body = std::mem::take(&mut c.body);
                    c.body = map_vec(self, body, f);
                }
                Expr::Lambda { lambda, pos }
            }
            Expr::Case { scrutinee, mut clauses, pos } => {
                let scrutinee = Box::new(f(self, *scrutinee));
                for c in &mut clauses {
                    let body = std::mem::take(&mut c.body);
                    c.body = map_vec(self, body, f);
                }
                Expr::Case { scrutinee, clauses, pos }
            }
            Expr::If { clauses, pos } => Expr::If {
                clauses: clauses
                    .into_iter()
                    .map(|(g, b)| (g, map_vec(self, b, f)))
                    .collect(),
                pos,
            },
            Expr::Match { pattern, value, pos } => {
                Expr::Match { pattern, value: Box::new(f(self, *value)), pos }
            }
            Expr::Lc { head, qualifiers, pos } => Expr::Lc {
                head: Box::new(f(self, *head)),
                qualifiers: qualifiers
                    .into_iter()
                    .map(|q| match q {
                        Qualifier::Generator { pattern, source } => {
                            Qualifier::Generator { pattern, source: f(self, source) }
                        }
                        Qualifier::Filter(e) => Qualifier::Filter(f(self, e)),
                    })
                    .collect(),
                pos,
            },
            Expr::Try { body, mut handlers, pos } => {
                let body = map_vec(self, body, f);
                for h in &mut handlers {
                    let hb = std::mem::take(&mut h.body);
                    h.body = map_vec(self, hb, f);
                }
                Expr::Try { body, handlers, pos }
            }
            Expr::Block { body, origin, pos } => {
                Expr::Block { body: map_vec(self, body, f), origin, pos }
            }
            Expr::TraceEmit { .. } => e,
        }
    }
}

/// Apply begin/end stack instrumentation; must run after POI instrumentation.
pub fn instrument_stack_tracing(
    m: &SourceModule,
    mode: StackMode,
) -> Result<SourceModule, InstrumentError> {
    if m.stack_instrumented {
        return Err(InstrumentError::AlreadyInstrumented(m.name.clone()));
    }
    if mode == StackMode::Off {
        return Ok(m.clone());
    }
    let mut out = m.clone();
    let mut rw = Rewriter {
        module_name: m.name.clone(),
        next_var: next_free_var_index(m),
        next_node: m.max_node_id,
    };
    if matches!(mode, StackMode::Calls | StackMode::Both) {
        for fun in &mut out.functions {
            let ctx = FrameCtx { name: fun.name.clone(), arity: fun.arity as u32 };
            for clause in &mut fun.clauses {
                let body = std::mem::take(&mut clause.body);
                let last = body.len().saturating_sub(1);
                clause.body = body
                    .into_iter()
                    .enumerate()
                    .map(|(i, e)| rw.rewrite_calls(e, &ctx, i == last))
                    .collect();
            }
        }
    }
    if matches!(mode, StackMode::Defs | StackMode::Both) {
        for fun in &mut out.functions {
            let name = fun.name.clone();
            let arity = fun.arity as u32;
            for clause in &mut fun.clauses {
                let body = std::mem::take(&mut clause.body);
                clause.body = vec![rw.wrap_def_clause(body, &name, arity, clause.line)];
            }
        }
    }
    out.max_node_id = rw.next_node;
    out.stack_instrumented = true;
    Ok(out)
}

struct FrameCtx {
    name: String,
    arity: u32,
}

impl Rewriter {
    fn frame(&self, ctx: &FrameCtx, line: u32, kind: FrameKind) -> Frame {
        Frame {
            module: self.module_name.clone(),
            name: ctx.name.clone(),
            arity: ctx.arity,
            line,
            kind,
        }
    }

    /// Wrap non-tail call sites in begin/end frames. Tail calls stay
    /// unwrapped so collected stacks match what a last-call-optimised
    /// runtime would report; POI-instrumented calls are never in tail
    /// position (their emits follow the call) and keep their frame open
    /// through the result emit.
    fn rewrite_calls(&mut self, e: Expr, ctx: &FrameCtx, tail: bool) -> Expr {
        match e {
            Expr::Block { body, origin, pos }
                if matches!(
                    origin,
                    BlockOrigin::PoiCall | BlockOrigin::PoiAitCall | BlockOrigin::PoiValueCall
                ) =>
            {
                self.wrap_poi_block(body, origin, pos, ctx)
            }
            Expr::Call { target, args, pos } => {
                let target = match target {
                    CallTarget::Dynamic(e) => {
                        CallTarget::Dynamic(Box::new(self.rewrite_calls(*e, ctx, false)))
                    }
                    other => other,
                };
                let args: Vec<Expr> =
                    args.into_iter().map(|a| self.rewrite_calls(a, ctx, false)).collect();
                let call = Expr::Call { target, args, pos };
                if tail {
                    call
                } else {
                    self.wrap_plain_call(call, ctx)
                }
            }
            other => self.map_stack_children(other, ctx, tail),
        }
    }

    fn map_stack_children(&mut self, e: Expr, ctx: &FrameCtx, tail: bool) -> Expr {
        match e {
            Expr::Block { body, origin, pos } => {
                let last = body.len().saturating_sub(1);
                let body = body
                    .into_iter()
                    .enumerate()
                    .map(|(i, e)| self.rewrite_calls(e, ctx, tail && i == last))
                    .collect();
                Expr::Block { body, origin, pos }
            }
            Expr::Case { scrutinee, mut clauses, pos } => {
                let scrutinee = Box::new(self.rewrite_calls(*scrutinee, ctx, false));
                for c in &mut clauses {
                    let body = std::mem::take(&mut c.body);
                    let last = body.len().saturating_sub(1);
                    c.body = body
                        .into_iter()
                        .enumerate()
                        .map(|(i, e)| self.rewrite_calls(e, ctx, tail && i == last))
                        .collect();
                }
                Expr::Case { scrutinee, clauses, pos }
            }
            Expr::If { clauses, pos } => Expr::If {
                clauses: clauses
                    .into_iter()
                    .map(|(g, b)| {
                        let last = b.len().saturating_sub(1);
                        let b = b
                            .into_iter()
                            .enumerate()
                            .map(|(i, e)| self.rewrite_calls(e, ctx, tail && i == last))
                            .collect();
                        (g, b)
                    })
                    .collect(),
                pos,
            },
            Expr::Try { body, mut handlers, pos } => {
                // The try body is never a tail position: the handler must
                // stay live until the body finishes.
                let body =
                    body.into_iter().map(|e| self.rewrite_calls(e, ctx, false)).collect();
                for h in &mut handlers {
                    let hb = std::mem::take(&mut h.body);
                    let last = hb.len().saturating_sub(1);
                    h.body = hb
                        .into_iter()
                        .enumerate()
                        .map(|(i, e)| self.rewrite_calls(e, ctx, tail && i == last))
                        .collect();
                }
                Expr::Try { body, handlers, pos }
            }
            Expr::Lambda { mut lambda, pos } => {
                for c in &mut lambda.clauses {
                    let body = std::mem::take(&mut c.body);
                    let last = body.len().saturating_sub(1);
                    c.body = body
                        .into_iter()
                        .enumerate()
                        .map(|(i, e)| self.rewrite_calls(e, ctx, i == last))
                        .collect();
                }
                Expr::Lambda { lambda, pos }
            }
            other => self.map_children(other, &mut |rw, child| rw.rewrite_calls(child, ctx, false)),
        }
    }

    /// `begin CV = Callee, AVs = Args, SV = make_ref(), begin-trace,
    ///  try VV = CV(AVs), end-trace, VV catch C:R -> end-trace, error(C, R) end end`
    ///
    /// Callee and arguments evaluate before the frame opens, so elements
    /// traced inside arguments do not see this frame.
    fn wrap_plain_call(&mut self, call: Expr, ctx: &FrameCtx) -> Expr {
        let (target, args, base) = match call {
            Expr::Call { target, args, pos } => (target, args, pos),
            other => return other,
        };
        let callee_expr = self.callee_expr(target, args.len(), base);
        let cv = self.fresh_var();
        let avs: Vec<String> = (0..args.len()).map(|_| self.fresh_var()).collect();
        let mut body = Vec::new();
        body.push(self.bind(&cv, callee_expr, base));
        for (name, arg) in avs.iter().zip(args) {
            body.push(self.bind(name, arg, base));
        }
        let callee_var = self.var(&cv, base);
        let arg_vars: Vec<Expr> = avs.iter().map(|n| self.var(n, base)).collect();
        let vv = self.fresh_var();
        let call = Expr::Call {
            target: CallTarget::Dynamic(Box::new(callee_var)),
            args: arg_vars,
            pos: self.fresh_pos(base),
        };
        let bind_result = self.bind(&vv, call, base);
        let frame = self.frame(ctx, base.line, FrameKind::CallSite);
        let (sv_bind, begin, end1, end2, sv) = self.frame_parts(frame, base);
        body.push(sv_bind);
        body.push(begin);
        body.push(self.try_with_end(vec![bind_result, end1, self.var(&vv, base)], end2, base));
        let _ = sv;
        Expr::Block { body, origin: BlockOrigin::StackFrame, pos: self.fresh_pos(base) }
    }

    /// Rebuild a POI call block so the call and its result emit run inside
    /// the frame. Value-wrapped calls hoist their callee/arguments first.
    fn wrap_poi_block(
        &mut self,
        body: Vec<Expr>,
        origin: BlockOrigin,
        pos: SourcePos,
        ctx: &FrameCtx,
    ) -> Expr {
        let base = pos;
        if origin == BlockOrigin::PoiValueCall {
            // Shape: [VV = Call, emit, VV]
            let mut it = body.into_iter();
            let bind = it.next().expect("poi block bind");
            let emit = it.next().expect("poi block emit");
            let result = it.next().expect("poi block result");
            let (pattern, call, mpos) = match bind {
                Expr::Match { pattern, value, pos } => (pattern, *value, pos),
                other => return other,
            };
            let (target, args, cpos) = match call {
                Expr::Call { target, args, pos } => (target, args, pos),
                other => {
                    // Wrapped expression turned out not to be a call; keep as is.
                    let bind = Expr::Match { pattern, value: Box::new(other), pos: mpos };
                    return Expr::Block { body: vec![bind, emit, result], origin, pos };
                }
            };
            let callee_expr = self.callee_expr(target, args.len(), cpos);
            let cv = self.fresh_var();
            let avs: Vec<String> = (0..args.len()).map(|_| self.fresh_var()).collect();
            let mut out = Vec::new();
            out.push(self.bind(&cv, callee_expr, base));
            for (name, arg) in avs.iter().zip(args) {
                let arg = self.rewrite_calls(arg, ctx, false);
                out.push(self.bind(name, arg, base));
            }
            let callee_var = self.var(&cv, base);
            let arg_vars: Vec<Expr> = avs.iter().map(|n| self.var(n, base)).collect();
            let inner_call = Expr::Call {
                target: CallTarget::Dynamic(Box::new(callee_var)),
                args: arg_vars,
                pos: self.fresh_pos(base),
            };
            let bind2 = Expr::Match { pattern, value: Box::new(inner_call), pos: mpos };
            let frame = self.frame(ctx, base.line, FrameKind::CallSite);
            let (sv_bind, begin, end1, end2, _sv) = self.frame_parts(frame, base);
            out.push(sv_bind);
            out.push(begin);
            out.push(self.try_with_end(vec![bind2, emit, end1, result], end2, base));
            return Expr::Block { body: out, origin, pos };
        }

        // Enhanced/AIT shape:
        // [RV = make_ref, CV = callee, AV_i = arg_i ..., add_i emits ...,
        //  VV = CV(AVs), result emit, VV]
        let n = body.len();
        debug_assert!(n >= 4);
        let mut head: Vec<Expr> = Vec::with_capacity(n);
        let mut it = body.into_iter();
        for _ in 0..n - 3 {
            let e = it.next().expect("poi block prefix");
            // Argument and callee binds may contain nested calls to wrap;
            // emits and the make_ref bind pass through untouched.
            let e = match e {
                Expr::Match { pattern, value, pos }
                    if !matches!(
                        value.as_ref(),
                        Expr::Call { target: CallTarget::Qualified(m, f), .. }
                            if m == "erlang" && f == "make_ref"
                    ) =>
                {
                    let value = self.rewrite_calls(*value, ctx, false);
                    Expr::Match { pattern, value: Box::new(value), pos }
                }
                other => other,
            };
            head.push(e);
        }
        let call_bind = it.next().expect("poi block call");
        let result_emit = it.next().expect("poi block result emit");
        let result_var = it.next().expect("poi block result var");
        let frame = self.frame(ctx, base.line, FrameKind::CallSite);
        let (sv_bind, begin, end1, end2, _sv) = self.frame_parts(frame, base);
        head.push(sv_bind);
        head.push(begin);
        head.push(self.try_with_end(vec![call_bind, result_emit, end1, result_var], end2, base));
        Expr::Block { body: head, origin, pos }
    }

    /// Shared pieces of a frame wrapper: the reference bind, the begin
    /// emit, and two end emits (success path and error path).
    fn frame_parts(&mut self, frame: Frame, base: SourcePos) -> (Expr, Expr, Expr, Expr, String) {
        let sv = self.fresh_var();
        let mk = self.make_ref_call(base);
        let sv_bind = self.bind(&sv, mk, base);
        let begin = Expr::TraceEmit {
            spec: EmitSpec::Begin { ref_expr: Box::new(self.var(&sv, base)), frame },
            pos: self.fresh_pos(base),
        };
        let end1 = Expr::TraceEmit {
            spec: EmitSpec::End { ref_expr: Box::new(self.var(&sv, base)) },
            pos: self.fresh_pos(base),
        };
        let end2 = Expr::TraceEmit {
            spec: EmitSpec::End { ref_expr: Box::new(self.var(&sv, base)) },
            pos: self.fresh_pos(base),
        };
        (sv_bind, begin, end1, end2, sv)
    }

    /// `try Body catch C:R -> EndEmit, error(C, R) end`
    fn try_with_end(&mut self, body: Vec<Expr>, end_emit: Expr, base: SourcePos) -> Expr {
        let cls = self.fresh_var();
        let rsn = self.fresh_var();
        let reraise = Expr::Call {
            target: CallTarget::Qualified("erlang".into(), "error".into()),
            args: vec![self.var(&cls, base), self.var(&rsn, base)],
            pos: self.fresh_pos(base),
        };
        Expr::Try {
            body,
            handlers: vec![CatchClause {
                class: Pattern::Var(cls),
                reason: Pattern::Var(rsn),
                body: vec![end_emit, reraise],
            }],
            pos: self.fresh_pos(base),
        }
    }

    /// Wrap a whole function clause body in a definition frame.
    fn wrap_def_clause(&mut self, body: Vec<Expr>, name: &str, arity: u32, line: u32) -> Expr {
        let base = body.first().map(|e| e.pos()).unwrap_or(SourcePos::new(line, 1));
        let frame = Frame {
            module: self.module_name.clone(),
            name: name.into(),
            arity,
            line,
            kind: FrameKind::FunDef,
        };
        let (sv_bind, begin, end1, end2, _sv) = self.frame_parts(frame, base);
        let vv = self.fresh_var();
        let inner = Expr::Block { body, origin: BlockOrigin::Plain, pos: self.fresh_pos(base) };
        let bind = self.bind(&vv, inner, base);
        let tryexpr = self.try_with_end(vec![bind, end1, self.var(&vv, base)], end2, base);
        Expr::Block {
            body: vec![sv_bind, begin, tryexpr],
            origin: BlockOrigin::StackFrame,
            pos: self.fresh_pos(base),
        }
    }
}
