//! Tree-walking evaluator for MiniFun.
//!
//! Evaluation is deterministic, performs no tail-call optimization (every
//! active call occupies an evaluator frame, so manual stack building in
//! instrumented code observes the full chain) and is bounded by a dual
//! budget: a reduction-step counter plus a call-depth cap, and an optional
//! wall-clock deadline. Trace-emit expressions append [`crate::trace::TraceEvent`]s
//! to an ordered per-run event log.

pub mod builtins;
pub mod machine;
pub mod value;

pub use builtins::builtin_apply;
pub use machine::{eval_itc, EvalBudget, EvalOutcome, RuntimeError};
pub use value::{term_cmp, Value};
