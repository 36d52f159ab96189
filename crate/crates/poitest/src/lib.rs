//! Point-of-interest (POI) regression testing for MiniFun programs.
//!
//! Given two versions of a program written in MiniFun (a small functional
//! language), a relation between POIs of both versions and a set of input
//! functions, this crate instruments both versions, generates and mutates
//! test inputs, collects value/call/stack traces and compares them under
//! configurable modes, reporting unexpected behaviours (UBs) with
//! call-argument and stack-trace evidence.
//!
//! The pipeline is organised as:
//!
//! - [`syntax`]: lexer, parser, pretty-printer and position-indexed AST
//! - [`eval`]: tree-walking evaluator with budgets and a trace-emit effect
//! - [`instrument`]: POI resolution and source-to-source instrumentation
//! - [`trace`]: trace events, trace elements and the collector state machines
//! - [`compare`]: the general comparison function and the VEF/TECF/UBRM machinery
//! - [`testgen`]: input generation, mutation and the timed campaign driver
//! - [`report`]: textual report rendering
//! - [`config`]: declarative configuration files
//! - [`cli`]: command line front end

pub mod cli;
pub mod compare;
pub mod config;
pub mod eval;
pub mod instrument;
pub mod poi;
pub mod report;
pub mod syntax;
pub mod testgen;
pub mod trace;

pub use compare::{ComparisonConfig, Mode, UbFinding};
pub use eval::{EvalBudget, EvalOutcome, RuntimeError, Value};
pub use instrument::{CallMode, InstrumentationPlan, StackMode};
pub use poi::{Frame, Poi, PoiKind, PoiRelation};
pub use testgen::{CampaignBudget, CampaignResult, Itc};
pub use trace::{TraceElement, TraceEvent};
