//! Trace events, trace elements and the collector state machines.
//!
//! Instrumented code emits an ordered log of [`TraceEvent`]s per ITC
//! execution. The collectors consume that log post-hoc and produce the
//! per-version traces of [`TraceElement`]s:
//!
//! - [`collect_basic`] keeps plain value adds;
//! - [`collect_enhanced_call`] merges `add_i` callee/argument events into the
//!   `ca` additional information of the call's result element;
//! - [`collect_stack`] additionally maintains the dynamic frame stack from
//!   begin/end events (including error unwinding) and snapshots it into `st`;
//! - [`collect_ait`] turns callee/argument groups into independent
//!   `callee_args` trace elements positioned before the call's result.
//!
//! Collectors are pure functions over event sequences; collectors for
//! different ITCs never share state, and an implementation that streams
//! events concurrently with evaluation must preserve the per-execution total
//! order to be equivalent.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::eval::Value;
use crate::poi::{Frame, FrameKind, Poi};

/// Wire-level message emitted by instrumented code.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    /// Callee or argument value of a call POI, keyed by the call's reference.
    AddI { poi: Poi, ref_value: Value, value: Value },
    /// Result of a call POI, closing the matching `AddI` group.
    AddRef { poi: Poi, ref_value: Value, value: Value },
    /// Plain value trace.
    Add { poi: Poi, value: Value },
    /// A stack frame opened.
    Begin { ref_value: Value, frame: Frame },
    /// A stack frame closed (normally or by error unwinding).
    End { ref_value: Value },
}

/// Callee and arguments of one call POI execution.
#[derive(Debug, Clone, PartialEq)]
pub struct CallInfo {
    pub callee: Value,
    pub args: Vec<Value>,
}

/// Additional information attached to a trace element; keys `ca` and `st`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ai {
    pub ca: Option<CallInfo>,
    pub st: Option<Vec<Frame>>,
}

impl Ai {
    pub fn is_empty(&self) -> bool {
        self.ca.is_none() && self.st.is_none()
    }
}

/// The triplet (POI, value, additional information).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceElement {
    pub poi: Poi,
    pub value: Value,
    pub ai: Ai,
}

impl TraceElement {
    pub fn plain(poi: Poi, value: Value) -> TraceElement {
        TraceElement { poi, value, ai: Ai::default() }
    }
}

/// Element of an AIT-mode trace: a regular trace element or an independent
/// callee/arguments element that precedes its call's result.
#[derive(Debug, Clone, PartialEq)]
pub enum AitElement {
    Te(TraceElement),
    CalleeArgs { poi: Poi, callee: Value, args: Vec<Value> },
}

impl AitElement {
    /// View as a trace element; callee/arguments elements become elements
    /// whose value is the `{callee_args, [Callee | Args]}` tuple, so the
    /// general comparison machinery applies unchanged.
    pub fn to_trace_element(&self) -> TraceElement {
        match self {
            AitElement::Te(te) => te.clone(),
            AitElement::CalleeArgs { poi, callee, args } => {
                let mut list = vec![callee.clone()];
                list.extend(args.iter().cloned());
                TraceElement::plain(
                    poi.clone(),
                    Value::Tuple(vec![Value::atom("callee_args"), Value::List(list)]),
                )
            }
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CollectError {
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Collector output: the trace plus diagnostics about calls whose result
/// never arrived (the run errored mid-call). Dangling groups are reported,
/// not treated as fatal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Collected<T> {
    pub elements: Vec<T>,
    pub incomplete_calls: Vec<Poi>,
}

/// Keep one trace element per plain `Add`, in order, with empty `ai`.
pub fn collect_basic(events: &[TraceEvent]) -> Result<Collected<TraceElement>, CollectError> {
    let mut out = Vec::new();
    for ev in events {
        match ev {
            TraceEvent::Add { poi, value } => {
                out.push(TraceElement::plain(poi.clone(), value.clone()))
            }
            TraceEvent::AddI { .. } | TraceEvent::AddRef { .. } => {
                return Err(CollectError::Protocol(
                    "call events in a plain value trace".into(),
                ))
            }
            TraceEvent::Begin { .. } | TraceEvent::End { .. } => {}
        }
    }
    Ok(Collected { elements: out, incomplete_calls: Vec::new() })
}

/// Pending callee/argument group keyed by the call's unique reference.
#[derive(Debug)]
struct RefGroup {
    poi: Poi,
    ref_value: Value,
    values: Vec<Value>,
}

fn split_callee(mut values: Vec<Value>) -> CallInfo {
    // The callee is stacked first; the remainder are the arguments in
    // source order.
    let callee = if values.is_empty() { Value::atom("undefined") } else { values.remove(0) };
    CallInfo { callee, args: values }
}

/// Merge enhanced call events: each `AddRef` closes the `AddI` group with the
/// same reference and yields a trace element carrying `ca`; interleaved plain
/// adds pass through with empty `ai`.
pub fn collect_enhanced_call(
    events: &[TraceEvent],
) -> Result<Collected<TraceElement>, CollectError> {
    let mut groups: Vec<RefGroup> = Vec::new();
    let mut out = Vec::new();
    for ev in events {
        match ev {
            TraceEvent::AddI { poi, ref_value, value } => {
                match groups.iter_mut().find(|g| g.ref_value == *ref_value) {
                    Some(g) => g.values.push(value.clone()),
                    None => groups.push(RefGroup {
                        poi: poi.clone(),
                        ref_value: ref_value.clone(),
                        values: vec![value.clone()],
                    }),
                }
            }
            TraceEvent::AddRef { poi, ref_value, value } => {
                let idx = groups
                    .iter()
                    .position(|g| g.ref_value == *ref_value)
                    .ok_or_else(|| CollectError::Protocol("add with unknown reference".into()))?;
                let group = groups.remove(idx);
                out.push(TraceElement {
                    poi: poi.clone(),
                    value: value.clone(),
                    ai: Ai { ca: Some(split_callee(group.values)), st: None },
                });
            }
            TraceEvent::Add { poi, value } => {
                out.push(TraceElement::plain(poi.clone(), value.clone()))
            }
            TraceEvent::Begin { .. } | TraceEvent::End { .. } => {}
        }
    }
    let incomplete = groups.into_iter().map(|g| g.poi).collect();
    Ok(Collected { elements: out, incomplete_calls: incomplete })
}

/// The frame stack machine shared by the stack-aware collectors.
#[derive(Debug, Default)]
struct FrameStack {
    frames: Vec<OpenFrame>,
    last_was_callsite_begin: bool,
}

#[derive(Debug)]
struct OpenFrame {
    ref_value: Value,
    frame: Frame,
    shadowed: bool,
}

impl FrameStack {
    fn begin(&mut self, ref_value: &Value, frame: &Frame) {
        // With both stack policies active, a call-site begin immediately
        // followed by the callee definition's begin describes the same
        // dynamic call; the definition frame is kept and the call-site
        // frame shadowed.
        if self.last_was_callsite_begin && frame.kind == FrameKind::FunDef {
            if let Some(top) = self.frames.last_mut() {
                if top.frame.kind == FrameKind::CallSite {
                    top.shadowed = true;
                }
            }
        }
        self.last_was_callsite_begin = frame.kind == FrameKind::CallSite;
        self.frames.push(OpenFrame {
            ref_value: ref_value.clone(),
            frame: frame.clone(),
            shadowed: false,
        });
    }

    /// Close the frame with `ref_value`. A non-top reference unwinds every
    /// frame above and including the match, modelling error propagation.
    fn end(&mut self, ref_value: &Value) -> Result<(), CollectError> {
        self.last_was_callsite_begin = false;
        match self.frames.iter().rposition(|f| f.ref_value == *ref_value) {
            Some(idx) => {
                self.frames.truncate(idx);
                Ok(())
            }
            None => Err(CollectError::Protocol("end with no matching begin".into())),
        }
    }

    /// Current stack, innermost frame first, shadowed frames dropped and
    /// adjacent identical frames collapsed (repeated same-line recursive
    /// calls appear once, matching how reports present them).
    fn snapshot(&self) -> Vec<Frame> {
        let mut out: Vec<Frame> = Vec::new();
        for f in self.frames.iter().rev() {
            if f.shadowed {
                continue;
            }
            if out.last() != Some(&f.frame) {
                out.push(f.frame.clone());
            }
        }
        out
    }

    fn note_value_event(&mut self) {
        self.last_was_callsite_begin = false;
    }

    fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Merge value/call events as [`collect_enhanced_call`] does while
/// maintaining the dynamic frame stack; every produced element's `st` is the
/// snapshot at the moment its `Add`/`AddRef` event fired.
pub fn collect_stack(events: &[TraceEvent]) -> Result<Collected<TraceElement>, CollectError> {
    let mut groups: Vec<RefGroup> = Vec::new();
    let mut stack = FrameStack::default();
    let mut out = Vec::new();
    for ev in events {
        match ev {
            TraceEvent::Begin { ref_value, frame } => stack.begin(ref_value, frame),
            TraceEvent::End { ref_value } => stack.end(ref_value)?,
            TraceEvent::AddI { poi, ref_value, value } => {
                stack.note_value_event();
                match groups.iter_mut().find(|g| g.ref_value == *ref_value) {
                    Some(g) => g.values.push(value.clone()),
                    None => groups.push(RefGroup {
                        poi: poi.clone(),
                        ref_value: ref_value.clone(),
                        values: vec![value.clone()],
                    }),
                }
            }
            TraceEvent::AddRef { poi, ref_value, value } => {
                stack.note_value_event();
                let idx = groups
                    .iter()
                    .position(|g| g.ref_value == *ref_value)
                    .ok_or_else(|| CollectError::Protocol("add with unknown reference".into()))?;
                let group = groups.remove(idx);
                out.push(TraceElement {
                    poi: poi.clone(),
                    value: value.clone(),
                    ai: Ai { ca: Some(split_callee(group.values)), st: Some(stack.snapshot()) },
                });
            }
            TraceEvent::Add { poi, value } => {
                stack.note_value_event();
                out.push(TraceElement {
                    poi: poi.clone(),
                    value: value.clone(),
                    ai: Ai { ca: None, st: Some(stack.snapshot()) },
                });
            }
        }
    }
    let incomplete = groups.into_iter().map(|g| g.poi).collect();
    Ok(Collected { elements: out, incomplete_calls: incomplete })
}

/// Whether the frame stack of a completed run is balanced (used by tests and
/// diagnostics; a run whose top-level result is a value must end empty).
pub fn stack_balanced(events: &[TraceEvent]) -> Result<bool, CollectError> {
    let mut stack = FrameStack::default();
    for ev in events {
        match ev {
            TraceEvent::Begin { ref_value, frame } => stack.begin(ref_value, frame),
            TraceEvent::End { ref_value } => stack.end(ref_value)?,
            _ => {}
        }
    }
    Ok(stack.is_empty())
}

/// Collect an AIT-mode trace.
///
/// Each call POI execution yields an independent `CalleeArgs` element
/// positioned where the call's arguments finished evaluating, followed
/// (after any elements produced inside the callee) by the result element.
/// A new `add_i` group arriving while another is pending flushes the pending
/// group, which is what places the outer call's arguments before anything
/// the callee produced.
pub fn collect_ait(events: &[TraceEvent]) -> Result<Collected<AitElement>, CollectError> {
    let mut pending: Option<RefGroup> = None;
    let mut stack = FrameStack::default();
    let mut out: Vec<AitElement> = Vec::new();
    let mut incomplete = Vec::new();
    let has_stack_events = events
        .iter()
        .any(|e| matches!(e, TraceEvent::Begin { .. } | TraceEvent::End { .. }));

    fn flush(pending: &mut Option<RefGroup>, out: &mut Vec<AitElement>) {
        if let Some(group) = pending.take() {
            let info = split_callee(group.values);
            out.push(AitElement::CalleeArgs {
                poi: group.poi,
                callee: info.callee,
                args: info.args,
            });
        }
    }

    for ev in events {
        match ev {
            TraceEvent::Begin { ref_value, frame } => stack.begin(ref_value, frame),
            TraceEvent::End { ref_value } => stack.end(ref_value)?,
            TraceEvent::AddI { poi, ref_value, value } => {
                stack.note_value_event();
                match &mut pending {
                    Some(group) if group.ref_value == *ref_value => {
                        group.values.push(value.clone())
                    }
                    Some(_) => {
                        flush(&mut pending, &mut out);
                        pending = Some(RefGroup {
                            poi: poi.clone(),
                            ref_value: ref_value.clone(),
                            values: vec![value.clone()],
                        });
                    }
                    None => {
                        pending = Some(RefGroup {
                            poi: poi.clone(),
                            ref_value: ref_value.clone(),
                            values: vec![value.clone()],
                        });
                    }
                }
            }
            TraceEvent::Add { poi, value } => {
                stack.note_value_event();
                flush(&mut pending, &mut out);
                let st = has_stack_events.then(|| stack.snapshot());
                out.push(AitElement::Te(TraceElement {
                    poi: poi.clone(),
                    value: value.clone(),
                    ai: Ai { ca: None, st },
                }));
            }
            TraceEvent::AddRef { .. } => {
                return Err(CollectError::Protocol(
                    "referenced result in an AIT trace".into(),
                ))
            }
        }
    }
    if let Some(group) = pending {
        incomplete.push(group.poi);
    }
    Ok(Collected { elements: out, incomplete_calls: incomplete })
}

/// Stable partition of a trace by POI, preserving relative order per POI.
pub fn split_per_poi(trace: &[TraceElement]) -> BTreeMap<Poi, Vec<TraceElement>> {
    let mut out: BTreeMap<Poi, Vec<TraceElement>> = BTreeMap::new();
    for te in trace {
        out.entry(te.poi.clone()).or_default().push(te.clone());
    }
    out
}

/// Render the event log, one event per line, values in MiniFun literal
/// syntax. Used by golden tests and the `-dump-trace` flag.
pub fn dump_events(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        match ev {
            TraceEvent::AddI { poi, ref_value, value } => {
                let _ = writeln!(out, "ADD_I {} {} {}", poi, ref_value, value);
            }
            TraceEvent::AddRef { poi, ref_value, value } => {
                let _ = writeln!(out, "ADD {} {} {}", poi, ref_value, value);
            }
            TraceEvent::Add { poi, value } => {
                let _ = writeln!(out, "ADD {} {}", poi, value);
            }
            TraceEvent::Begin { ref_value, frame } => {
                let _ = writeln!(out, "BEGIN {} {}", ref_value, frame);
            }
            TraceEvent::End { ref_value } => {
                let _ = writeln!(out, "END {}", ref_value);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poi::PoiKind;

    fn poi(n: u32) -> Poi {
        Poi::new("m.mf", n, PoiKind::Call)
    }

    fn frame(line: u32) -> Frame {
        Frame {
            module: "m".into(),
            name: "f".into(),
            arity: 0,
            line,
            kind: FrameKind::CallSite,
        }
    }

    #[test]
    fn basic_keeps_adds_in_order() {
        let p = poi(1);
        let events = vec![
            TraceEvent::Add { poi: p.clone(), value: Value::Int(1) },
            TraceEvent::Add { poi: p.clone(), value: Value::Int(2) },
        ];
        let got = collect_basic(&events).unwrap().elements;
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].value, Value::Int(1));
        assert!(got[0].ai.is_empty());
        assert!(collect_basic(&[]).unwrap().elements.is_empty());
    }

    #[test]
    fn basic_rejects_call_events() {
        let events = vec![TraceEvent::AddI {
            poi: poi(1),
            ref_value: Value::Ref(0),
            value: Value::Int(1),
        }];
        assert!(collect_basic(&events).is_err());
    }

    #[test]
    fn enhanced_merges_one_call() {
        let p = poi(1);
        let r = Value::Ref(7);
        let events = vec![
            TraceEvent::AddI { poi: p.clone(), ref_value: r.clone(), value: Value::atom("fcallee") },
            TraceEvent::AddI { poi: p.clone(), ref_value: r.clone(), value: Value::Int(5) },
            TraceEvent::AddRef { poi: p.clone(), ref_value: r.clone(), value: Value::Int(25) },
        ];
        let got = collect_enhanced_call(&events).unwrap();
        assert!(got.incomplete_calls.is_empty());
        let te = &got.elements[0];
        assert_eq!(te.value, Value::Int(25));
        let ca = te.ai.ca.as_ref().unwrap();
        assert_eq!(ca.callee, Value::atom("fcallee"));
        assert_eq!(ca.args, vec![Value::Int(5)]);
    }

    #[test]
    fn enhanced_dangling_group_is_diagnostic_not_error() {
        let events = vec![TraceEvent::AddI {
            poi: poi(1),
            ref_value: Value::Ref(0),
            value: Value::atom("f"),
        }];
        let got = collect_enhanced_call(&events).unwrap();
        assert!(got.elements.is_empty());
        assert_eq!(got.incomplete_calls, vec![poi(1)]);
    }

    #[test]
    fn enhanced_unknown_ref_is_protocol_error() {
        let events = vec![TraceEvent::AddRef {
            poi: poi(1),
            ref_value: Value::Ref(0),
            value: Value::Int(1),
        }];
        assert!(collect_enhanced_call(&events).is_err());
    }

    #[test]
    fn stack_snapshots_open_frames() {
        let p = poi(3);
        let events = vec![
            TraceEvent::Begin { ref_value: Value::Ref(1), frame: frame(10) },
            TraceEvent::Add { poi: p.clone(), value: Value::Int(1) },
            TraceEvent::End { ref_value: Value::Ref(1) },
        ];
        let got = collect_stack(&events).unwrap().elements;
        assert_eq!(got[0].ai.st.as_ref().unwrap(), &vec![frame(10)]);
    }

    #[test]
    fn stack_unwinds_past_unclosed_frames() {
        // End(r1) while r2 is open unwinds both, modelling an error that
        // propagated through the r2 call.
        let p = poi(3);
        let events = vec![
            TraceEvent::Begin { ref_value: Value::Ref(1), frame: frame(10) },
            TraceEvent::Begin { ref_value: Value::Ref(2), frame: frame(11) },
            TraceEvent::End { ref_value: Value::Ref(1) },
            TraceEvent::Add { poi: p.clone(), value: Value::Int(1) },
        ];
        let got = collect_stack(&events).unwrap().elements;
        assert_eq!(got[0].ai.st.as_ref().unwrap(), &Vec::<Frame>::new());
    }

    #[test]
    fn stack_end_without_begin_is_protocol_error() {
        let events = vec![TraceEvent::End { ref_value: Value::Ref(9) }];
        assert!(collect_stack(&events).is_err());
    }

    #[test]
    fn stack_collapses_adjacent_identical_frames() {
        let p = poi(3);
        let events = vec![
            TraceEvent::Begin { ref_value: Value::Ref(1), frame: frame(23) },
            TraceEvent::Begin { ref_value: Value::Ref(2), frame: frame(23) },
            TraceEvent::Begin { ref_value: Value::Ref(3), frame: frame(24) },
            TraceEvent::Add { poi: p.clone(), value: Value::Int(1) },
        ];
        let got = collect_stack(&events).unwrap().elements;
        assert_eq!(got[0].ai.st.as_ref().unwrap(), &vec![frame(24), frame(23)]);
    }

    #[test]
    fn ait_flushes_group_before_result() {
        let p = poi(1);
        let r = Value::Ref(0);
        let events = vec![
            TraceEvent::AddI { poi: p.clone(), ref_value: r.clone(), value: Value::atom("f") },
            TraceEvent::AddI { poi: p.clone(), ref_value: r.clone(), value: Value::Int(1) },
            TraceEvent::Add { poi: p.clone(), value: Value::Int(9) },
        ];
        let got = collect_ait(&events).unwrap().elements;
        assert_eq!(got.len(), 2);
        match &got[0] {
            AitElement::CalleeArgs { callee, args, .. } => {
                assert_eq!(callee, &Value::atom("f"));
                assert_eq!(args, &vec![Value::Int(1)]);
            }
            other => panic!("expected callee_args, got {:?}", other),
        }
        match &got[1] {
            AitElement::Te(te) => assert_eq!(te.value, Value::Int(9)),
            other => panic!("expected result element, got {:?}", other),
        }
    }

    #[test]
    fn ait_non_call_add_passes_through() {
        let p = poi(2);
        let events = vec![TraceEvent::Add { poi: p.clone(), value: Value::Int(4) }];
        let got = collect_ait(&events).unwrap().elements;
        assert_eq!(got, vec![AitElement::Te(TraceElement::plain(p, Value::Int(4)))]);
    }

    #[test]
    fn ait_ref_change_flushes_pending_group() {
        // Outer call's arguments are complete when the inner group starts.
        let outer = poi(1);
        let inner = poi(2);
        let events = vec![
            TraceEvent::AddI { poi: outer.clone(), ref_value: Value::Ref(0), value: Value::atom("f") },
            TraceEvent::AddI { poi: outer.clone(), ref_value: Value::Ref(0), value: Value::Int(3) },
            TraceEvent::AddI { poi: inner.clone(), ref_value: Value::Ref(1), value: Value::atom("g") },
            TraceEvent::Add { poi: inner.clone(), value: Value::Int(5) },
            TraceEvent::Add { poi: outer.clone(), value: Value::Int(8) },
        ];
        let got = collect_ait(&events).unwrap().elements;
        assert!(matches!(&got[0], AitElement::CalleeArgs { poi, .. } if *poi == outer));
        assert!(matches!(&got[1], AitElement::CalleeArgs { poi, .. } if *poi == inner));
        assert!(matches!(&got[2], AitElement::Te(te) if te.poi == inner));
        assert!(matches!(&got[3], AitElement::Te(te) if te.poi == outer));
    }

    #[test]
    fn split_preserves_order_per_poi() {
        let p1 = poi(1);
        let p2 = poi(2);
        let trace = vec![
            TraceElement::plain(p1.clone(), Value::atom("a")),
            TraceElement::plain(p2.clone(), Value::atom("b")),
            TraceElement::plain(p1.clone(), Value::atom("c")),
        ];
        let map = split_per_poi(&trace);
        assert_eq!(map[&p1].iter().map(|t| t.value.clone()).collect::<Vec<_>>(), vec![
            Value::atom("a"),
            Value::atom("c")
        ]);
        assert_eq!(map[&p2].len(), 1);
        assert!(split_per_poi(&[]).is_empty());
    }
}
