//! The evaluator: budgeted tree-walking interpretation of MiniFun modules.

use std::collections::HashMap;
use std::rc::Rc;
use std::time::Instant;

use super::builtins::{self, Builtin};
use super::value::{term_cmp, ClosureData, Value};
use crate::syntax::ast::*;
use crate::trace::TraceEvent;

/// Per-run resource limits.
///
/// The step counter bounds total reductions, the depth cap bounds the call
/// chain (the evaluator never optimises tail calls, so an unbounded loop
/// would otherwise grow the host stack), and the optional deadline lets a
/// campaign cut a run short. Exhausting any of them raises the uncatchable
/// `timeout` error class.
#[derive(Debug, Clone)]
pub struct EvalBudget {
    pub max_steps: u64,
    pub max_depth: u32,
    pub deadline: Option<Instant>,
    /// Host stack for the evaluation thread.
    pub thread_stack: usize,
}

/// Default per-ITC step budget; override with `POITEST_STEP_BUDGET`.
pub const DEFAULT_STEP_BUDGET: u64 = 5_000_000;

impl Default for EvalBudget {
    fn default() -> Self {
        EvalBudget {
            max_steps: DEFAULT_STEP_BUDGET,
            max_depth: 10_000,
            deadline: None,
            thread_stack: 64 << 20,
        }
    }
}

/// A raised MiniFun error: class atom plus reason value.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeError {
    pub class: String,
    pub reason: Value,
    pub pos: Option<(u32, u32)>,
}

impl RuntimeError {
    pub fn new(class: &str, reason: Value) -> RuntimeError {
        RuntimeError { class: class.into(), reason, pos: None }
    }

    /// Budget exhaustion cannot be intercepted by object-language handlers.
    pub fn catchable(&self) -> bool {
        self.class != "timeout"
    }
}

impl std::fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.class, self.reason)?;
        if let Some((l, c)) = self.pos {
            write!(f, " at {}:{}", l, c)?;
        }
        Ok(())
    }
}

/// Result of evaluating one ITC.
#[derive(Debug)]
pub struct EvalOutcome {
    pub result: Result<Value, RuntimeError>,
    /// Trace events in program emission order; events emitted before an
    /// error are retained.
    pub events: Vec<TraceEvent>,
    pub steps_used: u64,
}

/// Evaluate `name(args)` against a module set.
///
/// Deterministic given the module set and arguments. Runs on a dedicated
/// thread with a large stack so deep (non-tail-optimised) recursion is
/// bounded by the budget's depth cap rather than the host stack.
pub fn eval_itc(
    modules: &[SourceModule],
    name: &str,
    args: &[Value],
    budget: &EvalBudget,
) -> EvalOutcome {
    std::thread::scope(|scope| {
        let handle = std::thread::Builder::new()
            .name("minifun-eval".into())
            .stack_size(budget.thread_stack)
            .spawn_scoped(scope, || run(modules, name, args, budget))
            .expect("spawn evaluator thread");
        handle.join().expect("evaluator thread panicked")
    })
}

fn run(modules: &[SourceModule], name: &str, args: &[Value], budget: &EvalBudget) -> EvalOutcome {
    let mut machine = Machine {
        modules,
        max_steps: budget.max_steps,
        max_depth: budget.max_depth,
        deadline: budget.deadline,
        steps: 0,
        depth: 0,
        next_ref: 0,
        next_closure: 0,
        events: Vec::new(),
    };
    let result = machine.call_entry(name, args);
    EvalOutcome { result, events: machine.events, steps_used: machine.steps }
}

struct Machine<'m> {
    modules: &'m [SourceModule],
    max_steps: u64,
    max_depth: u32,
    deadline: Option<Instant>,
    steps: u64,
    depth: u32,
    next_ref: u64,
    next_closure: u64,
    events: Vec<TraceEvent>,
}

struct Env {
    scopes: Vec<HashMap<String, Value>>,
    module_idx: usize,
}

impl Env {
    fn lookup(&self, name: &str) -> Option<&Value> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn flatten(&self) -> HashMap<String, Value> {
        let mut out = HashMap::new();
        for scope in &self.scopes {
            for (k, v) in scope {
                out.insert(k.clone(), v.clone());
            }
        }
        out
    }
}

type EvalResult = Result<Value, RuntimeError>;

impl<'m> Machine<'m> {
    fn timeout(&self, why: &str) -> RuntimeError {
        RuntimeError::new("timeout", Value::atom(why))
    }

    fn step(&mut self) -> Result<(), RuntimeError> {
        self.steps += 1;
        if self.steps > self.max_steps {
            return Err(self.timeout("step_budget"));
        }
        if self.steps & 0xFFF == 0 {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    return Err(self.timeout("wall_clock"));
                }
            }
        }
        Ok(())
    }

    /// Fresh unique reference; distinct from every earlier one in this run.
    fn fresh_ref(&mut self) -> Value {
        let v = Value::Ref(self.next_ref);
        self.next_ref += 1;
        v
    }

    fn module_by_name(&self, name: &str) -> Option<usize> {
        self.modules.iter().position(|m| m.name == name)
    }

    fn call_entry(&mut self, name: &str, args: &[Value]) -> EvalResult {
        let modules = self.modules;
        for (idx, m) in modules.iter().enumerate() {
            if let Some(f) = m.function(name, args.len()) {
                return self.call_fun(idx, f, args.to_vec());
            }
        }
        Err(RuntimeError::new(
            "undef",
            Value::Tuple(vec![Value::atom(name), Value::Int(args.len() as i64)]),
        ))
    }

    fn call_fun(&mut self, module_idx: usize, f: &FunDef, args: Vec<Value>) -> EvalResult {
        self.depth += 1;
        if self.depth > self.max_depth {
            self.depth -= 1;
            return Err(self.timeout("call_depth"));
        }
        let mut env = Env { scopes: vec![HashMap::new()], module_idx };
        let r = self.run_clauses(&mut env, &f.clauses, &args, "function_clause");
        self.depth -= 1;
        r
    }

    /// Select and run the first clause whose patterns and guard accept `args`.
    fn run_clauses(
        &mut self,
        env: &mut Env,
        clauses: &[Clause],
        args: &[Value],
        no_match_class: &'static str,
    ) -> EvalResult {
        'clauses: for clause in clauses {
            let mut trial = HashMap::new();
            for (pat, val) in clause.patterns.iter().zip(args) {
                if !self.match_pattern(env, &mut trial, pat, val, false) {
                    continue 'clauses;
                }
            }
            if !self.guard_passes(env, &trial, &clause.guard)? {
                continue;
            }
            env.scopes.last_mut().expect("scope").extend(trial);
            return self.eval_body(env, &clause.body);
        }
        Err(RuntimeError::new(no_match_class, Value::List(args.to_vec())))
    }

    /// Evaluate a guard conjunction with the trial bindings visible.
    /// Any runtime error inside a guard makes the guard fail.
    fn guard_passes(
        &mut self,
        env: &mut Env,
        trial: &HashMap<String, Value>,
        guard: &[Expr],
    ) -> Result<bool, RuntimeError> {
        if guard.is_empty() {
            return Ok(true);
        }
        env.scopes.push(trial.clone());
        let mut ok = true;
        for g in guard {
            match self.eval(env, g) {
                Ok(v) if v.as_bool() == Some(true) => continue,
                Ok(_) => {
                    ok = false;
                    break;
                }
                Err(e) if e.catchable() => {
                    ok = false;
                    break;
                }
                Err(e) => {
                    env.scopes.pop();
                    return Err(e);
                }
            }
        }
        env.scopes.pop();
        Ok(ok)
    }

    fn eval_body(&mut self, env: &mut Env, body: &[Expr]) -> EvalResult {
        let mut last = Value::atom("ok");
        for e in body {
            last = self.eval(env, e)?;
        }
        Ok(last)
    }

    /// Pattern match `val` against `pat`, extending `trial`.
    ///
    /// Variables already bound (in the trial or, unless `shadow`, in the
    /// environment) must compare equal to the matched value. Generators use
    /// `shadow` to rebind names fresh per iteration.
    fn match_pattern(
        &self,
        env: &Env,
        trial: &mut HashMap<String, Value>,
        pat: &Pattern,
        val: &Value,
        shadow: bool,
    ) -> bool {
        match pat {
            Pattern::Wildcard => true,
            Pattern::Var(name) => {
                if let Some(bound) = trial.get(name) {
                    return bound == val;
                }
                if !shadow {
                    if let Some(bound) = env.lookup(name) {
                        return bound == val;
                    }
                }
                trial.insert(name.clone(), val.clone());
                true
            }
            Pattern::Int(n) => matches!(val, Value::Int(v) if v == n),
            Pattern::Atom(a) => matches!(val, Value::Atom(v) if v == a),
            Pattern::Tuple(pats) => match val {
                Value::Tuple(items) if items.len() == pats.len() => pats
                    .iter()
                    .zip(items)
                    .all(|(p, v)| self.match_pattern(env, trial, p, v, shadow)),
                _ => false,
            },
            Pattern::List(pats, tail) => match val {
                Value::List(items) => {
                    match tail {
                        Some(tail_pat) => {
                            if items.len() < pats.len() {
                                return false;
                            }
                            for (p, v) in pats.iter().zip(items) {
                                if !self.match_pattern(env, trial, p, v, shadow) {
                                    return false;
                                }
                            }
                            let rest = Value::List(items[pats.len()..].to_vec());
                            self.match_pattern(env, trial, tail_pat, &rest, shadow)
                        }
                        None => {
                            items.len() == pats.len()
                                && pats
                                    .iter()
                                    .zip(items)
                                    .all(|(p, v)| self.match_pattern(env, trial, p, v, shadow))
                        }
                    }
                }
                _ => false,
            },
        }
    }

    fn eval(&mut self, env: &mut Env, e: &Expr) -> EvalResult {
        self.step()?;
        match e {
            Expr::Int { value, .. } => Ok(Value::Int(*value)),
            Expr::Atom { name, .. } => Ok(Value::Atom(name.clone())),
            Expr::Str { codes, .. } => Ok(Value::List(codes.iter().map(|c| Value::Int(*c)).collect())),
            Expr::Var { name, pos } => env.lookup(name).cloned().ok_or_else(|| RuntimeError {
                class: "unbound".into(),
                reason: Value::atom(name),
                pos: Some((pos.line, pos.column)),
            }),
            Expr::List { items, tail, .. } => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(env, item)?);
                }
                match tail {
                    None => Ok(Value::List(out)),
                    Some(t) => match self.eval(env, t)? {
                        Value::List(rest) => {
                            out.extend(rest);
                            Ok(Value::List(out))
                        }
                        other => Err(RuntimeError::new("badlist", other)),
                    },
                }
            }
            Expr::Tuple { items, .. } => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(env, item)?);
                }
                Ok(Value::Tuple(out))
            }
            Expr::BinOp { op, lhs, rhs, pos } => self.eval_binop(env, *op, lhs, rhs, pos),
            Expr::UnOp { op, operand, pos } => {
                let v = self.eval(env, operand)?;
                match op {
                    UnOp::Neg => match v {
                        Value::Int(n) => n
                            .checked_neg()
                            .map(Value::Int)
                            .ok_or_else(|| RuntimeError::new("badarith", Value::atom("overflow"))),
                        other => Err(err_at("badarith", other, pos)),
                    },
                    UnOp::Not => match v.as_bool() {
                        Some(b) => Ok(Value::bool(!b)),
                        None => Err(err_at("badarg", v, pos)),
                    },
                }
            }
            Expr::Call { target, args, pos } => self.eval_call(env, target, args, pos),
            Expr::FunByName { module, name, arity, .. } => {
                let module = match module {
                    Some(m) => m.clone(),
                    None => self.modules[env.module_idx].name.clone(),
                };
                Ok(Value::FunRef { module, name: name.clone(), arity: *arity })
            }
            Expr::Lambda { lambda, .. } => {
                let id = self.next_closure;
                self.next_closure += 1;
                Ok(Value::Closure(Rc::new(ClosureData {
                    id,
                    module: self.modules[env.module_idx].name.clone(),
                    lambda: lambda.clone(),
                    captured: env.flatten(),
                })))
            }
            Expr::Case { scrutinee, clauses, .. } => {
                let v = self.eval(env, scrutinee)?;
                self.eval_case(env, clauses, v)
            }
            Expr::If { clauses, pos } => {
                for (guard, body) in clauses {
                    if self.guard_passes(env, &HashMap::new(), guard)? {
                        return self.eval_body(env, body);
                    }
                }
                Err(err_at("if_clause", Value::atom("no_true_branch"), pos))
            }
            Expr::Match { pattern, value, pos } => {
                let v = self.eval(env, value)?;
                let mut trial = HashMap::new();
                if self.match_pattern(env, &mut trial, pattern, &v, false) {
                    env.scopes.last_mut().expect("scope").extend(trial);
                    Ok(v)
                } else {
                    Err(err_at("badmatch", v, pos))
                }
            }
            Expr::Lc { head, qualifiers, .. } => {
                let mut out = Vec::new();
                self.eval_lc(env, head, qualifiers, &mut out)?;
                Ok(Value::List(out))
            }
            Expr::Try { body, handlers, .. } => {
                let depth_before = env.scopes.len();
                match self.eval_body(env, body) {
                    Ok(v) => Ok(v),
                    Err(e) if e.catchable() => {
                        env.scopes.truncate(depth_before);
                        self.eval_handlers(env, handlers, e)
                    }
                    Err(e) => Err(e),
                }
            }
            Expr::Block { body, .. } => self.eval_body(env, body),
            Expr::TraceEmit { spec, .. } => self.eval_emit(env, spec),
        }
    }

    fn eval_case(&mut self, env: &mut Env, clauses: &[Clause], v: Value) -> EvalResult {
        'clauses: for clause in clauses {
            let mut trial = HashMap::new();
            for pat in &clause.patterns {
                if !self.match_pattern(env, &mut trial, pat, &v, false) {
                    continue 'clauses;
                }
            }
            if !self.guard_passes(env, &trial, &clause.guard)? {
                continue;
            }
            env.scopes.last_mut().expect("scope").extend(trial);
            return self.eval_body(env, &clause.body);
        }
        Err(RuntimeError::new("case_clause", v))
    }

    fn eval_handlers(
        &mut self,
        env: &mut Env,
        handlers: &[CatchClause],
        e: RuntimeError,
    ) -> EvalResult {
        let class_val = Value::atom(&e.class);
        for h in handlers {
            let mut trial = HashMap::new();
            if self.match_pattern(env, &mut trial, &h.class, &class_val, false)
                && self.match_pattern(env, &mut trial, &h.reason, &e.reason, false)
            {
                env.scopes.last_mut().expect("scope").extend(trial);
                return self.eval_body(env, &h.body);
            }
        }
        Err(e)
    }

    fn eval_lc(
        &mut self,
        env: &mut Env,
        head: &Expr,
        qualifiers: &[Qualifier],
        out: &mut Vec<Value>,
    ) -> Result<(), RuntimeError> {
        match qualifiers.split_first() {
            None => {
                let v = self.eval(env, head)?;
                out.push(v);
                Ok(())
            }
            Some((Qualifier::Filter(cond), rest)) => {
                let v = self.eval(env, cond)?;
                match v.as_bool() {
                    Some(true) => self.eval_lc(env, head, rest, out),
                    Some(false) => Ok(()),
                    None => Err(RuntimeError::new("bad_filter", v)),
                }
            }
            Some((Qualifier::Generator { pattern, source }, rest)) => {
                let src = self.eval(env, source)?;
                let items = match src {
                    Value::List(items) => items,
                    other => return Err(RuntimeError::new("bad_generator", other)),
                };
                for item in items {
                    let mut trial = HashMap::new();
                    // Generator patterns shadow outer bindings; elements that
                    // do not match are skipped.
                    if self.match_pattern(env, &mut trial, pattern, &item, true) {
                        env.scopes.push(trial);
                        let r = self.eval_lc(env, head, rest, out);
                        env.scopes.pop();
                        r?;
                    }
                }
                Ok(())
            }
        }
    }

    fn eval_binop(
        &mut self,
        env: &mut Env,
        op: BinOp,
        lhs: &Expr,
        rhs: &Expr,
        pos: &SourcePos,
    ) -> EvalResult {
        // Lazy boolean operators first.
        if matches!(op, BinOp::AndAlso | BinOp::OrElse) {
            let l = self.eval(env, lhs)?;
            return match (op, l.as_bool()) {
                (BinOp::AndAlso, Some(false)) => Ok(Value::bool(false)),
                (BinOp::OrElse, Some(true)) => Ok(Value::bool(true)),
                (_, Some(_)) => self.eval(env, rhs),
                (_, None) => Err(err_at("badarg", l, pos)),
            };
        }
        let l = self.eval(env, lhs)?;
        let r = self.eval(env, rhs)?;
        match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
                let (a, b) = match (&l, &r) {
                    (Value::Int(a), Value::Int(b)) => (*a, *b),
                    _ => return Err(err_at("badarith", Value::Tuple(vec![l, r]), pos)),
                };
                let n = match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                    BinOp::Div => {
                        if b == 0 {
                            None
                        } else {
                            a.checked_div_euclid(b).map(Some).unwrap_or(None)
                        }
                    }
                    BinOp::Rem => {
                        if b == 0 {
                            None
                        } else {
                            a.checked_rem_euclid(b).map(Some).unwrap_or(None)
                        }
                    }
                    _ => unreachable!(),
                };
                n.map(Value::Int)
                    .ok_or_else(|| err_at("badarith", Value::Tuple(vec![l, r]), pos))
            }
            BinOp::Append => match (l, r) {
                (Value::List(mut a), Value::List(b)) => {
                    a.extend(b);
                    Ok(Value::List(a))
                }
                (l, r) => Err(err_at("badarg", Value::Tuple(vec![l, r]), pos)),
            },
            BinOp::Eq => Ok(Value::bool(l == r)),
            BinOp::Neq => Ok(Value::bool(l != r)),
            BinOp::Lt => Ok(Value::bool(term_cmp(&l, &r) == std::cmp::Ordering::Less)),
            BinOp::Gt => Ok(Value::bool(term_cmp(&l, &r) == std::cmp::Ordering::Greater)),
            BinOp::Le => Ok(Value::bool(term_cmp(&l, &r) != std::cmp::Ordering::Greater)),
            BinOp::Ge => Ok(Value::bool(term_cmp(&l, &r) != std::cmp::Ordering::Less)),
            BinOp::AndAlso | BinOp::OrElse => unreachable!(),
        }
    }

    fn eval_call(
        &mut self,
        env: &mut Env,
        target: &CallTarget,
        args: &[Expr],
        pos: &SourcePos,
    ) -> EvalResult {
        match target {
            CallTarget::Local(name) => {
                let argv = self.eval_args(env, args)?;
                let modules = self.modules;
                if let Some(f) = modules[env.module_idx].function(name, argv.len()) {
                    return self.call_fun(env.module_idx, f, argv);
                }
                match builtins::lookup(None, name, argv.len()) {
                    Some(b) => self.call_builtin(env, b, argv, pos),
                    None => Err(undef(name, argv.len())),
                }
            }
            CallTarget::Qualified(module, name) => {
                let argv = self.eval_args(env, args)?;
                self.call_qualified(env, module, name, argv, pos)
            }
            CallTarget::Dynamic(callee) => {
                let callee_val = self.eval(env, callee)?;
                let argv = self.eval_args(env, args)?;
                self.apply_value(env, callee_val, argv, pos)
            }
        }
    }

    fn eval_args(&mut self, env: &mut Env, args: &[Expr]) -> Result<Vec<Value>, RuntimeError> {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            out.push(self.eval(env, a)?);
        }
        Ok(out)
    }

    fn call_qualified(
        &mut self,
        env: &mut Env,
        module: &str,
        name: &str,
        argv: Vec<Value>,
        pos: &SourcePos,
    ) -> EvalResult {
        let modules = self.modules;
        if let Some(idx) = self.module_by_name(module) {
            if let Some(f) = modules[idx].function(name, argv.len()) {
                return self.call_fun(idx, f, argv);
            }
            return Err(undef(name, argv.len()));
        }
        match builtins::lookup(Some(module), name, argv.len()) {
            Some(b) => self.call_builtin(env, b, argv, pos),
            None => Err(undef(name, argv.len())),
        }
    }

    /// Call a first-class value: closure, named-function reference, or an
    /// atom resolved in the current module and then the builtins.
    fn apply_value(
        &mut self,
        env: &mut Env,
        callee: Value,
        argv: Vec<Value>,
        pos: &SourcePos,
    ) -> EvalResult {
        match callee {
            Value::Closure(data) => {
                if data.lambda.clauses[0].patterns.len() != argv.len() {
                    return Err(err_at("badarity", Value::Closure(data), pos));
                }
                self.depth += 1;
                if self.depth > self.max_depth {
                    self.depth -= 1;
                    return Err(self.timeout("call_depth"));
                }
                let module_idx = self.module_by_name(&data.module).unwrap_or(env.module_idx);
                let mut cl_env =
                    Env { scopes: vec![data.captured.clone(), HashMap::new()], module_idx };
                let r =
                    self.run_clauses(&mut cl_env, &data.lambda.clauses, &argv, "function_clause");
                self.depth -= 1;
                r
            }
            Value::FunRef { module, name, arity } => {
                if arity != argv.len() {
                    return Err(err_at(
                        "badarity",
                        Value::FunRef { module, name, arity },
                        pos,
                    ));
                }
                self.call_qualified(env, &module, &name, argv, pos)
            }
            Value::Atom(name) => {
                let modules = self.modules;
                if let Some(f) = modules[env.module_idx].function(&name, argv.len()) {
                    return self.call_fun(env.module_idx, f, argv);
                }
                match builtins::lookup(None, &name, argv.len()) {
                    Some(b) => self.call_builtin(env, b, argv, pos),
                    None => Err(undef(&name, argv.len())),
                }
            }
            other => Err(err_at("badfun", other, pos)),
        }
    }

    fn call_builtin(
        &mut self,
        env: &mut Env,
        b: Builtin,
        argv: Vec<Value>,
        pos: &SourcePos,
    ) -> EvalResult {
        match b {
            Builtin::Pure(name) => builtin_apply_at(name, &argv, pos),
            Builtin::MakeRef => Ok(self.fresh_ref()),
            Builtin::Error1 => {
                let reason = argv.into_iter().next().expect("arity checked");
                let class = match &reason {
                    Value::Atom(a) => a.clone(),
                    _ => "error".into(),
                };
                Err(RuntimeError { class, reason, pos: Some((pos.line, pos.column)) })
            }
            Builtin::Error2 => {
                let mut it = argv.into_iter();
                let class_v = it.next().expect("arity checked");
                let reason = it.next().expect("arity checked");
                match class_v {
                    Value::Atom(class) => {
                        Err(RuntimeError { class, reason, pos: Some((pos.line, pos.column)) })
                    }
                    other => Err(err_at("badarg", other, pos)),
                }
            }
            Builtin::Throw => {
                let reason = argv.into_iter().next().expect("arity checked");
                Err(RuntimeError { class: "throw".into(), reason, pos: Some((pos.line, pos.column)) })
            }
            Builtin::Apply => {
                let mut it = argv.into_iter();
                let module = it.next().expect("arity checked");
                let fname = it.next().expect("arity checked");
                let fargs = it.next().expect("arity checked");
                let (module, fname, fargs) = match (module, fname, fargs) {
                    (Value::Atom(m), Value::Atom(f), Value::List(a)) => (m, f, a),
                    (m, f, a) => {
                        return Err(err_at("badarg", Value::Tuple(vec![m, f, a]), pos));
                    }
                };
                self.call_qualified(env, &module, &fname, fargs, pos)
            }
            Builtin::Foldl => {
                let mut it = argv.into_iter();
                let f = it.next().expect("arity checked");
                let mut acc = it.next().expect("arity checked");
                let list = match it.next().expect("arity checked") {
                    Value::List(items) => items,
                    other => return Err(err_at("badarg", other, pos)),
                };
                for item in list {
                    acc = self.apply_value(env, f.clone(), vec![item, acc], pos)?;
                }
                Ok(acc)
            }
            Builtin::Map => {
                let mut it = argv.into_iter();
                let f = it.next().expect("arity checked");
                let list = match it.next().expect("arity checked") {
                    Value::List(items) => items,
                    other => return Err(err_at("badarg", other, pos)),
                };
                let mut out = Vec::with_capacity(list.len());
                for item in list {
                    out.push(self.apply_value(env, f.clone(), vec![item], pos)?);
                }
                Ok(Value::List(out))
            }
        }
    }

    fn eval_emit(&mut self, env: &mut Env, spec: &EmitSpec) -> EvalResult {
        let event = match spec {
            EmitSpec::Add { poi, value } => {
                let v = self.eval(env, value)?;
                TraceEvent::Add { poi: poi.clone(), value: v }
            }
            EmitSpec::AddRef { poi, ref_expr, value } => {
                let r = self.eval(env, ref_expr)?;
                let v = self.eval(env, value)?;
                TraceEvent::AddRef { poi: poi.clone(), ref_value: r, value: v }
            }
            EmitSpec::AddI { poi, ref_expr, value } => {
                let r = self.eval(env, ref_expr)?;
                let v = self.eval(env, value)?;
                TraceEvent::AddI { poi: poi.clone(), ref_value: r, value: v }
            }
            EmitSpec::Begin { ref_expr, frame } => {
                let r = self.eval(env, ref_expr)?;
                TraceEvent::Begin { ref_value: r, frame: frame.clone() }
            }
            EmitSpec::End { ref_expr } => {
                let r = self.eval(env, ref_expr)?;
                TraceEvent::End { ref_value: r }
            }
        };
        self.events.push(event);
        Ok(Value::atom("ok"))
    }
}

fn err_at(class: &str, reason: Value, pos: &SourcePos) -> RuntimeError {
    RuntimeError { class: class.into(), reason, pos: Some((pos.line, pos.column)) }
}

fn undef(name: &str, arity: usize) -> RuntimeError {
    RuntimeError::new("undef", Value::Tuple(vec![Value::atom(name), Value::Int(arity as i64)]))
}

fn builtin_apply_at(name: &str, argv: &[Value], pos: &SourcePos) -> EvalResult {
    builtins::builtin_apply(name, argv).map_err(|mut e| {
        e.pos = Some((pos.line, pos.column));
        e
    })
}
