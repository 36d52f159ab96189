//! Test input generation, mutation, scheduling, and the campaign driver.
//!
//! A campaign instruments both program versions once, then loops
//! generate → execute on both → collect → compare → record until its budget
//! runs out. Inputs for zero-arity functions are unit cases and run exactly
//! once; other inputs are drawn from `-spec` types when present and mutated
//! guided by comparison outcomes: parents that produced an unexpected
//! behaviour are preferred, with each UB type tracked as its own group so a
//! newly seen type gets fresh exploration weight.

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compare::{compare_itc, CompareError, ComparisonConfig, Granularity, Mode, Tecf, UbFinding, UbField, Vef};
use crate::eval::{eval_itc, EvalBudget, EvalOutcome, Value, machine::DEFAULT_STEP_BUDGET};
use crate::instrument::{apply_plan, poi_names_module, resolve_poi, CallMode, InstrumentationPlan, InstrumentError, StackMode};
use crate::poi::{Poi, PoiRelation};
use crate::syntax::ast::{ParamType, SourceModule};
use crate::syntax::{parse_module, pretty};
use crate::trace::{collect_ait, collect_basic, collect_enhanced_call, collect_stack, CollectError, TraceElement};

#[derive(Debug, Clone, Error)]
pub enum TestgenError {
    #[error("unknown input function {0}/{1}")]
    UnknownInputFunction(String, usize),
    #[error("ITC has no mutable arguments")]
    NoMutableArgs,
    #[error("cannot parse ITC {0}")]
    BadItc(String),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error(transparent)]
    Collect(#[from] CollectError),
}

/// One input of a test case: a call to an input function.
#[derive(Debug, Clone, PartialEq)]
pub struct Itc {
    pub name: String,
    pub args: Vec<Value>,
    pub lineage: Option<Lineage>,
}

/// Where a mutated ITC came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Lineage {
    pub parent_call: String,
    pub operator: MutationOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationOp {
    IntNudge,
    ListInsert,
    ListDelete,
    ListDuplicate,
    ListShuffle,
    ListTruncate,
    Replace,
}

impl Itc {
    pub fn new(name: impl Into<String>, args: Vec<Value>) -> Itc {
        Itc { name: name.into(), args, lineage: None }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for Itc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|v| v.to_string()).collect();
        write!(f, "{}({})", self.name, args.join(","))
    }
}

/// Parse one stored ITC line, e.g. `mergesortcomp([0,-1,1,2,-3])`.
///
/// The line is parsed with the regular MiniFun parser and its arguments are
/// evaluated as literals, so the failing-ITC store round-trips through the
/// value printer.
pub fn parse_itc(line: &str) -> Result<Itc, TestgenError> {
    let bad = || TestgenError::BadItc(line.trim().to_string());
    let src = format!("__itc__() -> {}.", line.trim());
    let m = parse_module(&src, "itc.mf").map_err(|_| bad())?;
    let fun = m.function("__itc__", 0).ok_or_else(bad)?;
    let body = &fun.clauses[0].body;
    if body.len() != 1 {
        return Err(bad());
    }
    let (name, args) = match &body[0] {
        crate::syntax::ast::Expr::Call {
            target: crate::syntax::ast::CallTarget::Local(name),
            args,
            ..
        } => (name.clone(), args),
        _ => return Err(bad()),
    };
    let args_src: Vec<String> = args.iter().map(pretty::expr_text).collect();
    let eval_src = format!("__itc_args__() -> [{}].", args_src.join(", "));
    let m2 = parse_module(&eval_src, "itc.mf").map_err(|_| bad())?;
    let outcome = eval_itc(&[m2], "__itc_args__", &[], &EvalBudget::default());
    match outcome.result {
        Ok(Value::List(values)) => Ok(Itc::new(name, values)),
        _ => Err(bad()),
    }
}

/// Generate the initial ITC for each input function.
///
/// Zero-arity functions admit exactly one ITC; otherwise arguments are drawn
/// from the declared `-spec` types or from a universal generator.
pub fn generate_initial_itcs(
    modules: &[SourceModule],
    funs: &[(String, usize)],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Itc>, TestgenError> {
    let mut out = Vec::new();
    for (name, arity) in funs {
        let fun = modules
            .iter()
            .find_map(|m| m.function(name, *arity))
            .ok_or_else(|| TestgenError::UnknownInputFunction(name.clone(), *arity))?;
        let args = match &fun.spec {
            Some(types) => types.iter().map(|t| value_for_type(t, rng)).collect(),
            None => (0..*arity).map(|_| universal_value(rng, 2)).collect(),
        };
        out.push(Itc::new(name.clone(), args));
    }
    Ok(out)
}

const ATOM_POOL: [&str; 6] = ["a", "b", "c", "ok", "left", "x"];

fn value_for_type(t: &ParamType, rng: &mut ChaCha8Rng) -> Value {
    match t {
        ParamType::Integer => Value::Int(rng.gen_range(-10..=10)),
        ParamType::Atom => Value::atom(ATOM_POOL[rng.gen_range(0..ATOM_POOL.len())]),
        ParamType::Any => universal_value(rng, 2),
        ParamType::List(inner) => {
            let len = rng.gen_range(0..=8);
            Value::List((0..len).map(|_| value_for_type(inner, rng)).collect())
        }
        ParamType::Tuple(items) => {
            Value::Tuple(items.iter().map(|t| value_for_type(t, rng)).collect())
        }
    }
}

fn universal_value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    let top = if depth == 0 { 2 } else { 4 };
    match rng.gen_range(0..top) {
        0 => Value::Int(rng.gen_range(-10..=10)),
        1 => Value::atom(ATOM_POOL[rng.gen_range(0..ATOM_POOL.len())]),
        2 => {
            let len = rng.gen_range(0..=4);
            Value::List((0..len).map(|_| universal_value(rng, depth - 1)).collect())
        }
        _ => {
            let len = rng.gen_range(0..=3);
            Value::Tuple((0..len).map(|_| universal_value(rng, depth - 1)).collect())
        }
    }
}

/// Apply one mutation operator to one argument of the ITC.
pub fn mutate_itc(itc: &Itc, rng: &mut ChaCha8Rng) -> Result<Itc, TestgenError> {
    if itc.args.is_empty() {
        return Err(TestgenError::NoMutableArgs);
    }
    let idx = rng.gen_range(0..itc.args.len());
    let mut args = itc.args.clone();
    let (new_arg, op) = mutate_value(&args[idx], rng);
    args[idx] = new_arg;
    Ok(Itc {
        name: itc.name.clone(),
        args,
        lineage: Some(Lineage { parent_call: itc.to_string(), operator: op }),
    })
}

fn nudge(n: i64, rng: &mut ChaCha8Rng) -> i64 {
    let delta = rng.gen_range(1..=3);
    if rng.gen_bool(0.5) {
        n.saturating_add(delta)
    } else {
        n.saturating_sub(delta)
    }
}

fn mutate_value(v: &Value, rng: &mut ChaCha8Rng) -> (Value, MutationOp) {
    match v {
        Value::Int(n) => (Value::Int(nudge(*n, rng)), MutationOp::IntNudge),
        Value::List(items) => {
            let choices: &[MutationOp] = if items.is_empty() {
                &[MutationOp::ListInsert, MutationOp::Replace]
            } else {
                &[
                    MutationOp::IntNudge,
                    MutationOp::ListInsert,
                    MutationOp::ListDelete,
                    MutationOp::ListDuplicate,
                    MutationOp::ListShuffle,
                    MutationOp::ListTruncate,
                    MutationOp::Replace,
                ]
            };
            let op = choices[rng.gen_range(0..choices.len())];
            let mut items = items.clone();
            match op {
                MutationOp::IntNudge => {
                    let i = rng.gen_range(0..items.len());
                    match &items[i] {
                        Value::Int(n) => items[i] = Value::Int(nudge(*n, rng)),
                        _ => {
                            let (v, _) = mutate_value(&items[i].clone(), rng);
                            items[i] = v;
                        }
                    }
                }
                MutationOp::ListInsert => {
                    let i = rng.gen_range(0..=items.len());
                    items.insert(i, Value::Int(rng.gen_range(-10..=10)));
                }
                MutationOp::ListDelete => {
                    let i = rng.gen_range(0..items.len());
                    items.remove(i);
                }
                MutationOp::ListDuplicate => {
                    let i = rng.gen_range(0..items.len());
                    let v = items[i].clone();
                    items.insert(i, v);
                }
                MutationOp::ListShuffle => {
                    // Fisher-Yates with the campaign RNG for determinism.
                    for i in (1..items.len()).rev() {
                        let j = rng.gen_range(0..=i);
                        items.swap(i, j);
                    }
                }
                MutationOp::ListTruncate => {
                    let keep = rng.gen_range(0..items.len());
                    items.truncate(keep);
                }
                MutationOp::Replace => {
                    let i = rng.gen_range(0..items.len());
                    items[i] = Value::Int(rng.gen_range(-10..=10));
                }
            }
            (Value::List(items), op)
        }
        _ => (universal_value(rng, 1), MutationOp::Replace),
    }
}

/// Outcome a pool entry produced when it ran.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Ub(String),
}

#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub itc: Itc,
    pub outcome: Outcome,
}

/// Mutation pool with per-group selection weights.
///
/// Entries whose outcome was a UB weigh `w_ub` (default 4) against `w_ok`
/// (default 1) for passing entries; each UB type forms its own group whose
/// weight decays as the group gets picked, so newly seen UB types start with
/// fresh exploration weight.
#[derive(Debug)]
pub struct Pool {
    pub entries: Vec<PoolEntry>,
    picks: BTreeMap<String, u32>,
    pub w_ub: f64,
    pub w_ok: f64,
}

impl Default for Pool {
    fn default() -> Self {
        Pool { entries: Vec::new(), picks: BTreeMap::new(), w_ub: 4.0, w_ok: 1.0 }
    }
}

impl Pool {
    pub fn push(&mut self, itc: Itc, outcome: Outcome) {
        self.entries.push(PoolEntry { itc, outcome });
    }

    fn group_key(outcome: &Outcome) -> String {
        match outcome {
            Outcome::Pass => "__pass__".to_string(),
            Outcome::Ub(t) => t.clone(),
        }
    }

    /// Weighted choice of the next parent to mutate; `None` on an empty
    /// pool or one without mutable entries.
    pub fn schedule_next(&mut self, rng: &mut ChaCha8Rng) -> Option<Itc> {
        let weights: Vec<f64> = self
            .entries
            .iter()
            .map(|e| {
                if e.itc.args.is_empty() {
                    return 0.0;
                }
                let base = match e.outcome {
                    Outcome::Pass => self.w_ok,
                    Outcome::Ub(_) => self.w_ub,
                };
                let picks = *self.picks.get(&Self::group_key(&e.outcome)).unwrap_or(&0);
                base / (1.0 + picks as f64)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut roll = rng.gen_range(0.0..total);
        for (entry, w) in self.entries.iter().zip(&weights) {
            if *w <= 0.0 {
                continue;
            }
            if roll < *w {
                *self.picks.entry(Self::group_key(&entry.outcome)).or_insert(0) += 1;
                return Some(entry.itc.clone());
            }
            roll -= w;
        }
        None
    }
}

/// Campaign stop condition. Wall-clock budgets honour `-to`; the fixed ITC
/// count (per input function) makes runs bit-reproducible for tests.
#[derive(Debug, Clone, Copy)]
pub enum CampaignBudget {
    WallClock(Duration),
    ItcCount(u32),
}

#[derive(Debug, Clone)]
pub struct CampaignOptions {
    pub budget: CampaignBudget,
    pub seed: u64,
    pub step_budget: u64,
}

impl CampaignOptions {
    pub fn new(budget: CampaignBudget, seed: u64) -> CampaignOptions {
        CampaignOptions { budget, seed, step_budget: DEFAULT_STEP_BUDGET }
    }
}

/// Findings of one UB type within one input function.
#[derive(Debug, Clone)]
pub struct UbGroup {
    pub ub_type: String,
    pub count: u32,
    pub example_itc: Itc,
    pub example: UbFinding,
}

#[derive(Debug, Clone)]
pub struct FunctionResult {
    pub name: String,
    pub arity: usize,
    pub generated: u32,
    pub mismatching: u32,
    pub groups: Vec<UbGroup>,
    pub elapsed: Duration,
}

/// Aggregated campaign outcome; failing ITCs are retained for replay.
#[derive(Debug, Clone, Default)]
pub struct CampaignResult {
    pub functions: Vec<FunctionResult>,
    pub failing: Vec<Itc>,
}

impl CampaignResult {
    pub fn total_mismatching(&self) -> u32 {
        self.functions.iter().map(|f| f.mismatching).sum()
    }
}

/// Derive the instrumentation plan a comparison configuration needs.
///
/// Call information is collected when the TECF or UBRM consumes it or the
/// mode compares whole additional information; stack frames likewise. AIT
/// mode switches call POIs to independent callee/argument elements.
pub fn infer_plan(cfg: &ComparisonConfig, pois: Vec<Poi>) -> InstrumentationPlan {
    let ubrm_has = |f: UbField| {
        cfg.ubrm.entries.values().any(|fields| fields.contains(&f))
            || cfg.ubrm.default_fields.as_ref().is_some_and(|fields| fields.contains(&f))
    };
    let custom = matches!(cfg.tecf, Tecf::Custom { .. });
    let needs_ca = custom
        || matches!(cfg.tecf, Tecf::ValueThenArgs)
        || ubrm_has(UbField::Ca)
        || cfg.mode == Mode::Uai
        || matches!(cfg.vef, Vef::WholeTe);
    let needs_st = custom
        || matches!(cfg.tecf, Tecf::ValueThenStack)
        || ubrm_has(UbField::St)
        || cfg.mode == Mode::Uai
        || matches!(cfg.vef, Vef::ValueAndStack | Vef::WholeTe);
    let call_mode = if cfg.mode == Mode::Ait {
        CallMode::Ait
    } else if needs_ca {
        CallMode::Enhanced
    } else {
        CallMode::Standard
    };
    let stack_mode = if needs_st { StackMode::Calls } else { StackMode::Off };
    InstrumentationPlan::new(pois, call_mode, stack_mode)
}

/// Instrumented module sets for both versions, with every related POI
/// resolved up front so resolution errors surface before any execution.
pub struct PreparedCampaign {
    pub old: Vec<SourceModule>,
    pub new: Vec<SourceModule>,
    pub old_pois: Vec<Poi>,
    pub new_pois: Vec<Poi>,
    pub plan: InstrumentationPlan,
}

pub fn prepare(
    old: &[SourceModule],
    new: &[SourceModule],
    relation: &PoiRelation,
    plan: &InstrumentationPlan,
) -> Result<PreparedCampaign, TestgenError> {
    let old_pois = relation.old_pois();
    let new_pois = relation.new_pois();
    for (side, pois) in [(old, &old_pois), (new, &new_pois)] {
        for poi in pois.iter() {
            let m = side
                .iter()
                .find(|m| poi_names_module(m, poi))
                .ok_or_else(|| InstrumentError::PoiNotFound { poi: poi.clone() })?;
            resolve_poi(m, poi)?;
        }
    }
    let old_plan = InstrumentationPlan::new(old_pois.clone(), plan.call_mode, plan.stack_mode);
    let new_plan = InstrumentationPlan::new(new_pois.clone(), plan.call_mode, plan.stack_mode);
    let old_instr =
        old.iter().map(|m| apply_plan(m, &old_plan)).collect::<Result<Vec<_>, _>>()?;
    let new_instr =
        new.iter().map(|m| apply_plan(m, &new_plan)).collect::<Result<Vec<_>, _>>()?;
    Ok(PreparedCampaign {
        old: old_instr,
        new: new_instr,
        old_pois,
        new_pois,
        plan: plan.clone(),
    })
}

fn collect_trace(
    prepared: &InstrumentationPlan,
    outcome: &EvalOutcome,
) -> Result<Vec<TraceElement>, TestgenError> {
    let elements = match (prepared.stack_mode, prepared.call_mode) {
        (StackMode::Off, CallMode::Standard) => collect_basic(&outcome.events)?.elements,
        (StackMode::Off, CallMode::Enhanced) => collect_enhanced_call(&outcome.events)?.elements,
        (_, CallMode::Ait) => collect_ait(&outcome.events)?
            .elements
            .iter()
            .map(|e| e.to_trace_element())
            .collect(),
        _ => collect_stack(&outcome.events)?.elements,
    };
    Ok(elements)
}

/// Execute one ITC on both instrumented versions and compare.
pub fn run_one_itc(
    prepared: &PreparedCampaign,
    itc: &Itc,
    cfg: &ComparisonConfig,
    relation: &PoiRelation,
    step_budget: u64,
    deadline: Option<Instant>,
) -> Result<Vec<UbFinding>, TestgenError> {
    let budget = EvalBudget { max_steps: step_budget, deadline, ..EvalBudget::default() };
    let old_out = eval_itc(&prepared.old, &itc.name, &itc.args, &budget);
    let new_out = eval_itc(&prepared.new, &itc.name, &itc.args, &budget);
    let mut findings = classify(prepared, &old_out, &new_out, cfg, relation)?;
    for f in &mut findings {
        f.itc = Some(itc.to_string());
    }
    Ok(findings)
}

fn error_finding(
    ub_type: &str,
    relation: &PoiRelation,
    old_payload: Option<Value>,
    new_payload: Option<Value>,
) -> UbFinding {
    let (old_poi, new_poi) = relation
        .pairs
        .first()
        .cloned()
        .unwrap_or_else(|| (Poi::new("?", 0, crate::poi::PoiKind::Call), Poi::new("?", 0, crate::poi::PoiKind::Call)));
    UbFinding {
        ub_type: ub_type.into(),
        itc: None,
        old_te: old_payload.map(|v| TraceElement::plain(old_poi.clone(), v)),
        new_te: new_payload.map(|v| TraceElement::plain(new_poi.clone(), v)),
        old_poi,
        new_poi,
        history: Vec::new(),
        unknown_ub_type: false,
    }
}

/// Classify an executed pair into findings.
///
/// Identical error classes on the same ITC count as matching behaviour;
/// differing classes are a UB; a timed-out run against a completed one is a
/// truncated trace.
fn classify(
    prepared: &PreparedCampaign,
    old_out: &EvalOutcome,
    new_out: &EvalOutcome,
    cfg: &ComparisonConfig,
    relation: &PoiRelation,
) -> Result<Vec<UbFinding>, TestgenError> {
    use std::result::Result as R;
    match (&old_out.result, &new_out.result) {
        (R::Ok(_), R::Ok(_)) => {
            let old_trace = collect_trace(&prepared.plan, old_out)?;
            let new_trace = collect_trace(&prepared.plan, new_out)?;
            Ok(compare_itc(
                &old_trace,
                &new_trace,
                Some((&prepared.old_pois, &prepared.new_pois)),
                relation,
                cfg,
            )?)
        }
        (R::Err(e), R::Ok(_)) if e.class == "timeout" => Ok(vec![error_finding(
            "trace_truncated",
            relation,
            Some(Value::atom("timeout")),
            None,
        )]),
        (R::Ok(_), R::Err(e)) if e.class == "timeout" => Ok(vec![error_finding(
            "trace_truncated",
            relation,
            None,
            Some(Value::atom("timeout")),
        )]),
        (R::Err(e), R::Ok(_)) => Ok(vec![error_finding(
            "old_error",
            relation,
            Some(Value::atom(&e.class)),
            None,
        )]),
        (R::Ok(_), R::Err(e)) => Ok(vec![error_finding(
            "new_error",
            relation,
            None,
            Some(Value::atom(&e.class)),
        )]),
        (R::Err(a), R::Err(b)) if a.class == b.class => Ok(Vec::new()),
        (R::Err(a), R::Err(b)) => Ok(vec![error_finding(
            "both_error",
            relation,
            Some(Value::atom(&a.class)),
            Some(Value::atom(&b.class)),
        )]),
    }
}

/// Run a full campaign over both versions.
pub fn run_campaign(
    old: &[SourceModule],
    new: &[SourceModule],
    relation: &PoiRelation,
    funs: &[(String, usize)],
    cfg: &ComparisonConfig,
    plan: &InstrumentationPlan,
    options: &CampaignOptions,
) -> Result<CampaignResult, TestgenError> {
    let prepared = prepare(old, new, relation, plan)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut result = CampaignResult::default();
    let deadline = match options.budget {
        CampaignBudget::WallClock(d) => Some(Instant::now() + d),
        CampaignBudget::ItcCount(_) => None,
    };

    for (name, arity) in funs {
        let started = Instant::now();
        let mut fr = FunctionResult {
            name: name.clone(),
            arity: *arity,
            generated: 0,
            mismatching: 0,
            groups: Vec::new(),
            elapsed: Duration::ZERO,
        };
        let mut pool = Pool::default();
        let initial =
            generate_initial_itcs(old, std::slice::from_ref(&(name.clone(), *arity)), &mut rng)?;
        let mut next: Option<Itc> = initial.into_iter().next();

        loop {
            let itc = match next.take() {
                Some(itc) => itc,
                None => break,
            };
            let findings =
                run_one_itc(&prepared, &itc, cfg, relation, options.step_budget, deadline)?;
            fr.generated += 1;
            let outcome = match findings.first() {
                Some(f) => Outcome::Ub(f.ub_type.clone()),
                None => Outcome::Pass,
            };
            if !findings.is_empty() {
                fr.mismatching += 1;
                result.failing.push(itc.clone());
            }
            for f in findings {
                match fr.groups.iter_mut().find(|g| g.ub_type == f.ub_type) {
                    Some(g) => g.count += 1,
                    None => fr.groups.push(UbGroup {
                        ub_type: f.ub_type.clone(),
                        count: 1,
                        example_itc: itc.clone(),
                        example: f,
                    }),
                }
            }
            pool.push(itc, outcome);

            if *arity == 0 {
                break; // unit case: exactly one ITC
            }
            match options.budget {
                CampaignBudget::WallClock(_) => {
                    if Instant::now() >= deadline.expect("wall clock budget") {
                        break;
                    }
                }
                CampaignBudget::ItcCount(n) => {
                    if fr.generated >= n {
                        break;
                    }
                }
            }
            // Half the stream explores fresh inputs, half mutates scheduled
            // parents; the mix keeps mismatch ratios away from saturation.
            let fresh = rng.gen_bool(0.5);
            next = if fresh {
                generate_initial_itcs(
                    old,
                    std::slice::from_ref(&(name.clone(), *arity)),
                    &mut rng,
                )?
                .into_iter()
                .next()
            } else {
                match pool.schedule_next(&mut rng) {
                    Some(parent) => match mutate_itc(&parent, &mut rng) {
                        Ok(itc) => Some(itc),
                        Err(_) => generate_initial_itcs(
                            old,
                            std::slice::from_ref(&(name.clone(), *arity)),
                            &mut rng,
                        )?
                        .into_iter()
                        .next(),
                    },
                    None => generate_initial_itcs(
                        old,
                        std::slice::from_ref(&(name.clone(), *arity)),
                        &mut rng,
                    )?
                    .into_iter()
                    .next(),
                }
            };
        }
        fr.elapsed = started.elapsed();
        result.functions.push(fr);
    }
    Ok(result)
}

/// Re-run stored ITCs once each and report, grouped per input function.
pub fn replay_itcs(
    old: &[SourceModule],
    new: &[SourceModule],
    relation: &PoiRelation,
    cfg: &ComparisonConfig,
    plan: &InstrumentationPlan,
    itcs: &[Itc],
    step_budget: u64,
) -> Result<CampaignResult, TestgenError> {
    let prepared = prepare(old, new, relation, plan)?;
    let mut result = CampaignResult::default();
    for itc in itcs {
        let started = Instant::now();
        let findings = run_one_itc(&prepared, itc, cfg, relation, step_budget, None)?;
        let fr = match result
            .functions
            .iter_mut()
            .find(|f| f.name == itc.name && f.arity == itc.arity())
        {
            Some(fr) => fr,
            None => {
                result.functions.push(FunctionResult {
                    name: itc.name.clone(),
                    arity: itc.arity(),
                    generated: 0,
                    mismatching: 0,
                    groups: Vec::new(),
                    elapsed: Duration::ZERO,
                });
                result.functions.last_mut().expect("just pushed")
            }
        };
        fr.generated += 1;
        if !findings.is_empty() {
            fr.mismatching += 1;
            result.failing.push(itc.clone());
        }
        for f in findings {
            match fr.groups.iter_mut().find(|g| g.ub_type == f.ub_type) {
                Some(g) => g.count += 1,
                None => fr.groups.push(UbGroup {
                    ub_type: f.ub_type.clone(),
                    count: 1,
                    example_itc: itc.clone(),
                    example: f,
                }),
            }
        }
        fr.elapsed += started.elapsed();
    }
    Ok(result)
}

/// The comparison granularity is part of the configuration; expose a helper
/// for tests that need whole-trace comparisons.
pub fn with_granularity(mut cfg: ComparisonConfig, granularity: Granularity) -> ComparisonConfig {
    cfg.granularity = granularity;
    cfg
}
