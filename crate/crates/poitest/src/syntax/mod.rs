//! MiniFun surface syntax: lexer, parser, pretty-printer and AST.
//!
//! MiniFun is an Erlang-like expression language: integers, strings (lists of
//! character codes), atoms, tuples, lists, single-assignment variables,
//! multi-clause functions with pattern matching and guards, `case`, `if`,
//! anonymous functions, list comprehensions, match bindings `P = E`,
//! comma-separated expression sequences and `try ... catch ... end`.
//! Source files use the `.mf` extension; comments run from `%` to end of line.

pub mod ast;
pub mod parser;
pub mod pretty;
pub mod token;

pub use ast::{
    find_expressions, BinOp, CatchClause, Clause, Expr, ExprId, FunDef, Lambda, ParamType,
    Pattern, Qualifier, SourceModule, SourcePos, UnOp,
};
pub use parser::{parse_module, parse_module_with, ParseError, ParseOptions};
pub use pretty::pretty_print;
