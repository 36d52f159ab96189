//! The general comparison function and its configurable machinery.
//!
//! A comparison is driven by three pieces: the value-extractor function
//! (VEF) projects each trace element to the datum being compared, the
//! trace-element comparison function (TECF) compares one pair of elements
//! and returns `true` or an unexpected-behaviour type atom, and the
//! unexpected-behaviour report mapping (UBRM) selects which report fields
//! (`val`, `ca`, `st`, `his`) each UB type shows. Six modes bundle these:
//! NUAI ignores additional information, NUAI-T uses it only for UB typing,
//! NUAI-R only in reports, NUAI-TR both, UAI compares value and additional
//! information as a whole, and AIT compares callee/argument elements as
//! first-class trace elements before the call's result.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::rc::Rc;

use thiserror::Error;

use crate::eval::{term_cmp, Value};
use crate::poi::{Frame, Poi, PoiRelation};
use crate::trace::{split_per_poi, Ai, TraceElement};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CompareError {
    #[error("unknown value-extractor {0}")]
    UnknownVef(String),
    #[error("unknown trace-element comparison function {0}")]
    UnknownTecf(String),
    #[error("unknown report field {0}")]
    UnknownUbField(String),
    #[error("unknown comparison mode {0}")]
    UnknownMode(String),
    #[error("trace element has no {0} additional information")]
    MissingAiKey(&'static str),
    #[error("related POI {0} was never instrumented")]
    RelationPoiMissing(Poi),
}

/// Named value extractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vef {
    /// Drop POI and additional information, compare values alone.
    ValueOnly,
    /// The default: the (value, additional information) pair.
    ValueAndAi,
    ValueAndStack,
    WholeTe,
}

/// Projection of one trace element under a VEF.
#[derive(Debug, Clone, PartialEq)]
pub enum Extracted {
    Value(Value),
    ValueAi(Value, Ai),
    ValueStack(Value, Option<Vec<Frame>>),
    Whole(Poi, Value, Ai),
}

impl Extracted {
    fn primary(&self) -> &Value {
        match self {
            Extracted::Value(v)
            | Extracted::ValueAi(v, _)
            | Extracted::ValueStack(v, _)
            | Extracted::Whole(_, v, _) => v,
        }
    }
}

impl Vef {
    pub fn apply(&self, te: &TraceElement) -> Extracted {
        match self {
            Vef::ValueOnly => Extracted::Value(te.value.clone()),
            Vef::ValueAndAi => Extracted::ValueAi(te.value.clone(), te.ai.clone()),
            Vef::ValueAndStack => Extracted::ValueStack(te.value.clone(), te.ai.st.clone()),
            Vef::WholeTe => Extracted::Whole(te.poi.clone(), te.value.clone(), te.ai.clone()),
        }
    }
}

/// Look up a value extractor by its registry name.
pub fn vef_lookup(name: &str) -> Result<Vef, CompareError> {
    match name {
        "value_only" => Ok(Vef::ValueOnly),
        "value_and_ai" => Ok(Vef::ValueAndAi),
        "value_and_stack" => Ok(Vef::ValueAndStack),
        "whole_te" => Ok(Vef::WholeTe),
        other => Err(CompareError::UnknownVef(other.into())),
    }
}

/// Call arguments of a call POI element (the callee is not included).
pub fn get_te_args(te: &TraceElement) -> Result<Vec<Value>, CompareError> {
    te.ai.ca.as_ref().map(|ca| ca.args.clone()).ok_or(CompareError::MissingAiKey("ca"))
}

/// Stack snapshot of an element.
pub fn get_te_stack(te: &TraceElement) -> Result<Vec<Frame>, CompareError> {
    te.ai.st.clone().ok_or(CompareError::MissingAiKey("st"))
}

/// Outcome of one TECF application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TecfResult {
    True,
    Ub(String),
}

pub type CustomTecfFn = Rc<dyn Fn(&Vef, &TraceElement, &TraceElement) -> TecfResult>;

/// Trace-element comparison functions. Presets cover the common cases;
/// custom ones are registered programmatically.
#[derive(Clone)]
pub enum Tecf {
    /// Equality of VEF outputs; mismatches are `different_value`.
    Equality,
    /// Equal values pass; otherwise call arguments split the UB type into
    /// `different_value_same_args` / `different_value_different_args`.
    /// Elements without call information degrade to `different_value`.
    ValueThenArgs,
    /// As above with stack snapshots: `diff_value_same_stack_trace` /
    /// `diff_value_diff_stack_trace`.
    ValueThenStack,
    /// Three-way term comparison of the extracted values:
    /// greater passes, equal is `same`, less is `downgrade`.
    PerformanceCompare,
    Custom { name: String, f: CustomTecfFn },
}

impl std::fmt::Debug for Tecf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tecf::Equality => write!(f, "equality"),
            Tecf::ValueThenArgs => write!(f, "value_then_args"),
            Tecf::ValueThenStack => write!(f, "value_then_stack"),
            Tecf::PerformanceCompare => write!(f, "performance_compare"),
            Tecf::Custom { name, .. } => write!(f, "custom({})", name),
        }
    }
}

/// Look up a preset TECF.
pub fn tecf_lookup(name: &str) -> Result<Tecf, CompareError> {
    match name {
        "equality" => Ok(Tecf::Equality),
        "value_then_args" => Ok(Tecf::ValueThenArgs),
        "value_then_stack" => Ok(Tecf::ValueThenStack),
        "performance_compare" => Ok(Tecf::PerformanceCompare),
        other => Err(CompareError::UnknownTecf(other.into())),
    }
}

impl Tecf {
    pub fn apply(&self, vef: &Vef, toe: &TraceElement, tne: &TraceElement) -> TecfResult {
        match self {
            Tecf::Equality => {
                if vef.apply(toe) == vef.apply(tne) {
                    TecfResult::True
                } else {
                    TecfResult::Ub("different_value".into())
                }
            }
            Tecf::ValueThenArgs => {
                if vef.apply(toe) == vef.apply(tne) {
                    return TecfResult::True;
                }
                match (get_te_args(toe), get_te_args(tne)) {
                    (Ok(a), Ok(b)) if a == b => {
                        TecfResult::Ub("different_value_same_args".into())
                    }
                    (Ok(_), Ok(_)) => TecfResult::Ub("different_value_different_args".into()),
                    _ => TecfResult::Ub("different_value".into()),
                }
            }
            Tecf::ValueThenStack => {
                if vef.apply(toe) == vef.apply(tne) {
                    return TecfResult::True;
                }
                match (get_te_stack(toe), get_te_stack(tne)) {
                    (Ok(a), Ok(b)) if a == b => {
                        TecfResult::Ub("diff_value_same_stack_trace".into())
                    }
                    (Ok(_), Ok(_)) => TecfResult::Ub("diff_value_diff_stack_trace".into()),
                    _ => TecfResult::Ub("different_value".into()),
                }
            }
            Tecf::PerformanceCompare => {
                match term_cmp(vef.apply(toe).primary(), vef.apply(tne).primary()) {
                    std::cmp::Ordering::Greater => TecfResult::True,
                    std::cmp::Ordering::Equal => TecfResult::Ub("same".into()),
                    std::cmp::Ordering::Less => TecfResult::Ub("downgrade".into()),
                }
            }
            Tecf::Custom { f, .. } => f(vef, toe, tne),
        }
    }
}

/// Report fields selectable per UB type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UbField {
    Val,
    Ca,
    St,
    His,
}

impl UbField {
    pub fn from_atom(name: &str) -> Result<UbField, CompareError> {
        match name {
            "val" => Ok(UbField::Val),
            "ca" => Ok(UbField::Ca),
            "st" => Ok(UbField::St),
            "his" => Ok(UbField::His),
            other => Err(CompareError::UnknownUbField(other.into())),
        }
    }
}

/// Unexpected-behaviour report mapping: UB type atom to field list, with an
/// optional wildcard default entry.
#[derive(Debug, Clone)]
pub struct Ubrm {
    pub entries: BTreeMap<String, Vec<UbField>>,
    pub default_fields: Option<Vec<UbField>>,
}

impl Ubrm {
    /// Default mapping used by the mode builders: any UB type shows the
    /// traced values.
    pub fn value_only_default() -> Ubrm {
        Ubrm { entries: BTreeMap::new(), default_fields: Some(vec![UbField::Val]) }
    }

    /// Print-everything mapping.
    pub fn everything() -> Ubrm {
        Ubrm {
            entries: BTreeMap::new(),
            default_fields: Some(vec![UbField::Val, UbField::Ca, UbField::St]),
        }
    }

    pub fn with_entries(mut self, entries: Vec<(String, Vec<UbField>)>) -> Ubrm {
        for (k, v) in entries {
            self.entries.insert(k, v);
        }
        self
    }

    /// Fields for a UB type. An unknown type without a default entry falls
    /// back to printing everything and flags the report with a warning.
    pub fn fields_for(&self, ub_type: &str) -> (Vec<UbField>, bool) {
        if let Some(fields) = self.entries.get(ub_type) {
            return (fields.clone(), false);
        }
        if let Some(fields) = &self.default_fields {
            return (fields.clone(), false);
        }
        (vec![UbField::Val, UbField::Ca, UbField::St, UbField::His], true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Whole,
    PerPoi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Nuai,
    NuaiT,
    NuaiR,
    NuaiTr,
    Uai,
    Ait,
}

impl Mode {
    pub fn from_atom(name: &str) -> Result<Mode, CompareError> {
        match name {
            "nuai" => Ok(Mode::Nuai),
            "nuai_t" => Ok(Mode::NuaiT),
            "nuai_r" => Ok(Mode::NuaiR),
            "nuai_tr" => Ok(Mode::NuaiTr),
            "uai" => Ok(Mode::Uai),
            "ait" => Ok(Mode::Ait),
            other => Err(CompareError::UnknownMode(other.into())),
        }
    }
}

/// The (VEF, TECF, UBRM, mode) bundle driving comparisons.
#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub vef: Vef,
    pub tecf: Tecf,
    pub ubrm: Ubrm,
    pub mode: Mode,
    pub granularity: Granularity,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            vef: Vef::ValueAndAi,
            tecf: Tecf::Equality,
            ubrm: Ubrm::everything(),
            mode: Mode::Uai,
            granularity: Granularity::PerPoi,
        }
    }
}

/// Build the configuration for a comparison mode.
///
/// `tecf` is honoured by the typing modes (NUAI-T / NUAI-TR); `ubrm` by the
/// reporting modes (NUAI-R / NUAI-TR) and as an override elsewhere.
pub fn build_mode_config(
    mode: Mode,
    tecf: Option<Tecf>,
    ubrm: Option<Vec<(String, Vec<UbField>)>>,
) -> ComparisonConfig {
    let (vef, default_tecf, default_ubrm) = match mode {
        Mode::Nuai | Mode::NuaiT | Mode::NuaiR | Mode::NuaiTr | Mode::Ait => {
            (Vef::ValueOnly, Tecf::Equality, Ubrm::value_only_default())
        }
        Mode::Uai => (Vef::ValueAndAi, Tecf::Equality, Ubrm::everything()),
    };
    let tecf = match mode {
        Mode::NuaiT | Mode::NuaiTr => tecf.unwrap_or(default_tecf),
        _ => default_tecf,
    };
    let ubrm = match (mode, ubrm) {
        (Mode::NuaiR | Mode::NuaiTr, Some(entries)) => {
            Ubrm::value_only_default().with_entries(entries)
        }
        (_, Some(entries)) => default_ubrm.with_entries(entries),
        (_, None) => default_ubrm,
    };
    ComparisonConfig { vef, tecf, ubrm, mode, granularity: Granularity::PerPoi }
}

/// One reported unexpected behaviour.
#[derive(Debug, Clone)]
pub struct UbFinding {
    pub ub_type: String,
    /// Rendered ITC call, filled in by the campaign layer.
    pub itc: Option<String>,
    pub old_poi: Poi,
    pub new_poi: Poi,
    /// Divergent elements; `None` on the side a length mismatch exhausted.
    pub old_te: Option<TraceElement>,
    pub new_te: Option<TraceElement>,
    /// Pairs compared before the divergence, in comparison order.
    pub history: Vec<(TraceElement, TraceElement)>,
    /// True when the UB type had no UBRM entry and no default existed.
    pub unknown_ub_type: bool,
}

impl UbFinding {
    /// Values shown in a `Trace:` section: the history values of one side
    /// followed by its divergent value.
    fn side_values(&self, old: bool) -> Vec<Value> {
        let mut vals: Vec<Value> = self
            .history
            .iter()
            .map(|(o, n)| if old { o.value.clone() } else { n.value.clone() })
            .collect();
        if let Some(te) = if old { &self.old_te } else { &self.new_te } {
            vals.push(te.value.clone());
        }
        vals
    }

    /// Render the detected-error block body (the per-POI sections), gated
    /// by the UBRM field list for this finding's UB type.
    pub fn render(&self, ubrm: &Ubrm) -> String {
        let (fields, fallback) = ubrm.fields_for(&self.ub_type);
        let mut out = String::new();
        if fallback || self.unknown_ub_type {
            let _ = writeln!(out, "(unknown UB type; printing all available information)");
        }
        self.render_side(&mut out, true, &fields);
        out.push('\n');
        self.render_side(&mut out, false, &fields);
        if fields.contains(&UbField::His) {
            let _ = writeln!(out, "  History:");
            for (o, n) in &self.history {
                let _ = writeln!(out, "    {} ~ {}", o.value, n.value);
            }
        }
        out
    }

    fn render_side(&self, out: &mut String, old: bool, fields: &[UbField]) {
        let poi = if old { &self.old_poi } else { &self.new_poi };
        let te = if old { &self.old_te } else { &self.new_te };
        let _ = writeln!(out, "POI: {}", poi);
        if fields.contains(&UbField::Val) {
            let _ = writeln!(out, "  Trace:");
            let vals = self.side_values(old);
            let rendered: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "    [{}]", rendered.join(","));
            if te.is_none() {
                let _ = writeln!(out, "    (trace exhausted)");
            }
        }
        if fields.contains(&UbField::Ca) {
            if let Some(ca) = te.as_ref().and_then(|t| t.ai.ca.as_ref()) {
                let _ = writeln!(out, "  Call POI Info:");
                let _ = writeln!(out, "    Callee: {}", ca.callee);
                let args: Vec<String> = ca.args.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "    Args: [{}]", args.join(","));
            }
        }
        if fields.contains(&UbField::St) {
            if let Some(st) = te.as_ref().and_then(|t| t.ai.st.as_ref()) {
                let _ = writeln!(out, "  Stack");
                if st.is_empty() {
                    let _ = writeln!(out, "    []");
                }
                for frame in st {
                    let _ = writeln!(out, "    {}", frame);
                }
            }
        }
    }
}

/// Walk two traces pairwise under (VEF, TECF); `None` when both exhaust with
/// every comparison true. The first non-true result stops the walk; a trace
/// exhausting first yields `trace_length_mismatch` with the surplus element
/// attached.
pub fn cf_general(
    old: &[TraceElement],
    new: &[TraceElement],
    vef: &Vef,
    tecf: &Tecf,
    _ubrm: &Ubrm,
) -> Option<(String, Option<TraceElement>, Option<TraceElement>, Vec<(TraceElement, TraceElement)>)>
{
    let mut history = Vec::new();
    let mut old_it = old.iter();
    let mut new_it = new.iter();
    loop {
        match (old_it.next(), new_it.next()) {
            (None, None) => return None,
            (Some(toe), Some(tne)) => match tecf.apply(vef, toe, tne) {
                TecfResult::True => history.push((toe.clone(), tne.clone())),
                TecfResult::Ub(ub_type) => {
                    return Some((ub_type, Some(toe.clone()), Some(tne.clone()), history))
                }
            },
            (Some(toe), None) => {
                return Some((
                    "trace_length_mismatch".into(),
                    Some(toe.clone()),
                    None,
                    history,
                ))
            }
            (None, Some(tne)) => {
                return Some((
                    "trace_length_mismatch".into(),
                    None,
                    Some(tne.clone()),
                    history,
                ))
            }
        }
    }
}

/// Compare the traces of one ITC under a relation.
///
/// Per-POI granularity pairs the sub-traces selected by each relation pair
/// (a POI related to several partners is compared against each
/// independently); whole granularity walks the interleaved traces with POI
/// identity mapped through the relation. Comparison stops at the first UB
/// per relation pair.
pub fn compare_itc(
    old_trace: &[TraceElement],
    new_trace: &[TraceElement],
    instrumented: Option<(&[Poi], &[Poi])>,
    relation: &PoiRelation,
    cfg: &ComparisonConfig,
) -> Result<Vec<UbFinding>, CompareError> {
    match cfg.granularity {
        Granularity::PerPoi => {
            let old_map = split_per_poi(old_trace);
            let new_map = split_per_poi(new_trace);
            let empty: Vec<TraceElement> = Vec::new();
            let mut findings = Vec::new();
            for (old_poi, new_poi) in &relation.pairs {
                if let Some((old_pois, new_pois)) = instrumented {
                    if !old_pois.contains(old_poi) {
                        return Err(CompareError::RelationPoiMissing(old_poi.clone()));
                    }
                    if !new_pois.contains(new_poi) {
                        return Err(CompareError::RelationPoiMissing(new_poi.clone()));
                    }
                }
                let old_sub = old_map.get(old_poi).unwrap_or(&empty);
                let new_sub = new_map.get(new_poi).unwrap_or(&empty);
                if let Some((ub_type, old_te, new_te, history)) =
                    cf_general(old_sub, new_sub, &cfg.vef, &cfg.tecf, &cfg.ubrm)
                {
                    findings.push(self::finding(
                        ub_type,
                        old_poi.clone(),
                        new_poi.clone(),
                        old_te,
                        new_te,
                        history,
                        cfg,
                    ));
                }
            }
            Ok(findings)
        }
        Granularity::Whole => {
            let mut history = Vec::new();
            let mut old_it = old_trace.iter();
            let mut new_it = new_trace.iter();
            loop {
                match (old_it.next(), new_it.next()) {
                    (None, None) => return Ok(Vec::new()),
                    (Some(toe), Some(tne)) => {
                        if !relation.related(&toe.poi, &tne.poi) {
                            return Ok(vec![self::finding(
                                "different_poi".into(),
                                toe.poi.clone(),
                                tne.poi.clone(),
                                Some(toe.clone()),
                                Some(tne.clone()),
                                history,
                                cfg,
                            )]);
                        }
                        match cfg.tecf.apply(&cfg.vef, toe, tne) {
                            TecfResult::True => history.push((toe.clone(), tne.clone())),
                            TecfResult::Ub(ub_type) => {
                                return Ok(vec![self::finding(
                                    ub_type,
                                    toe.poi.clone(),
                                    tne.poi.clone(),
                                    Some(toe.clone()),
                                    Some(tne.clone()),
                                    history,
                                    cfg,
                                )])
                            }
                        }
                    }
                    (Some(toe), None) => {
                        return Ok(vec![self::finding(
                            "trace_length_mismatch".into(),
                            toe.poi.clone(),
                            toe.poi.clone(),
                            Some(toe.clone()),
                            None,
                            history,
                            cfg,
                        )])
                    }
                    (None, Some(tne)) => {
                        return Ok(vec![self::finding(
                            "trace_length_mismatch".into(),
                            tne.poi.clone(),
                            tne.poi.clone(),
                            None,
                            Some(tne.clone()),
                            history,
                            cfg,
                        )])
                    }
                }
            }
        }
    }
}

fn finding(
    ub_type: String,
    old_poi: Poi,
    new_poi: Poi,
    old_te: Option<TraceElement>,
    new_te: Option<TraceElement>,
    history: Vec<(TraceElement, TraceElement)>,
    cfg: &ComparisonConfig,
) -> UbFinding {
    let unknown =
        cfg.ubrm.default_fields.is_none() && !cfg.ubrm.entries.contains_key(&ub_type);
    UbFinding {
        ub_type,
        itc: None,
        old_poi,
        new_poi,
        old_te,
        new_te,
        history,
        unknown_ub_type: unknown,
    }
}
