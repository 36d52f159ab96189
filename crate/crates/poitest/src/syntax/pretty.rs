//! Pretty-printer for MiniFun modules.
//!
//! Printing is a pure function of the AST structure; re-parsing the output
//! yields a structurally equal module (up to source positions). Instrumented
//! modules print to legal MiniFun too, which is the main debugging aid for
//! inspecting what the instrumenter produced.

use super::ast::*;
use std::fmt::Write;

const KEYWORDS: [&str; 15] = [
    "begin", "end", "case", "of", "if", "fun", "when", "try", "catch", "div", "rem", "not",
    "andalso", "orelse", "tracer",
];

/// Render an atom, quoting when the bare spelling would not lex as an atom.
pub fn atom_text(name: &str) -> String {
    let bare = !name.is_empty()
        && name.as_bytes()[0].is_ascii_lowercase()
        && name.bytes().all(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'@')
        && !KEYWORDS.contains(&name);
    if bare {
        name.to_string()
    } else {
        let mut out = String::from("'");
        for c in name.chars() {
            if c == '\'' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('\'');
        out
    }
}

/// Render one expression on a single line.
pub fn expr_text(e: &Expr) -> String {
    inline(e, 0)
}

pub fn pretty_print(m: &SourceModule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "-module({}).", atom_text(&m.name));
    if !m.exports.is_empty() {
        let names: Vec<String> =
            m.exports.iter().map(|(n, a)| format!("{}/{}", atom_text(n), a)).collect();
        let _ = writeln!(out, "-export([{}]).", names.join(", "));
    }
    for fun in &m.functions {
        out.push('\n');
        if let Some(spec) = &fun.spec {
            let types: Vec<String> = spec.iter().map(type_text).collect();
            let _ = writeln!(out, "-spec {}({}) -> any().", atom_text(&fun.name), types.join(", "));
        }
        let clauses: Vec<String> = fun
            .clauses
            .iter()
            .map(|c| {
                let mut s = format!("{}{}", atom_text(&fun.name), clause_head(c));
                write_body(&mut s, &c.body, 1);
                s
            })
            .collect();
        let _ = writeln!(out, "{}.", clauses.join(";\n"));
    }
    out
}

fn type_text(t: &ParamType) -> String {
    match t {
        ParamType::Integer => "integer()".into(),
        ParamType::Atom => "atom()".into(),
        ParamType::Any => "any()".into(),
        ParamType::List(inner) => format!("[{}]", type_text(inner)),
        ParamType::Tuple(items) => {
            let items: Vec<String> = items.iter().map(type_text).collect();
            format!("{{{}}}", items.join(", "))
        }
    }
}

fn clause_head(c: &Clause) -> String {
    let pats: Vec<String> = c.patterns.iter().map(pattern_text).collect();
    let mut s = format!("({})", pats.join(", "));
    if !c.guard.is_empty() {
        let gs: Vec<String> = c.guard.iter().map(|e| inline(e, 0)).collect();
        let _ = write!(s, " when {}", gs.join(", "));
    }
    s.push_str(" ->");
    s
}

fn pattern_text(p: &Pattern) -> String {
    match p {
        Pattern::Wildcard => "_".into(),
        Pattern::Var(v) => v.clone(),
        Pattern::Int(n) => n.to_string(),
        Pattern::Atom(a) => atom_text(a),
        Pattern::List(items, tail) => {
            let items: Vec<String> = items.iter().map(pattern_text).collect();
            match tail {
                Some(t) => format!("[{} | {}]", items.join(", "), pattern_text(t)),
                None => format!("[{}]", items.join(", ")),
            }
        }
        Pattern::Tuple(items) => {
            let items: Vec<String> = items.iter().map(pattern_text).collect();
            format!("{{{}}}", items.join(", "))
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

/// Write a body sequence, one statement per line at `level`.
fn write_body(out: &mut String, body: &[Expr], level: usize) {
    for (i, e) in body.iter().enumerate() {
        out.push('\n');
        indent(out, level);
        write_stmt(out, e, level);
        if i + 1 < body.len() {
            out.push(',');
        }
    }
}

/// Statement position: block-like constructs expand across lines.
fn write_stmt(out: &mut String, e: &Expr, level: usize) {
    match e {
        Expr::Block { body, .. } => {
            out.push_str("begin");
            write_body(out, body, level + 1);
            out.push('\n');
            indent(out, level);
            out.push_str("end");
        }
        Expr::Case { scrutinee, clauses, .. } => {
            let _ = write!(out, "case {} of", inline(scrutinee, 0));
            for (i, c) in clauses.iter().enumerate() {
                out.push('\n');
                indent(out, level + 1);
                out.push_str(&case_clause_head(c));
                write_body(out, &c.body, level + 2);
                if i + 1 < clauses.len() {
                    out.push(';');
                }
            }
            out.push('\n');
            indent(out, level);
            out.push_str("end");
        }
        Expr::Try { body, handlers, .. } => {
            out.push_str("try");
            write_body(out, body, level + 1);
            out.push('\n');
            indent(out, level);
            out.push_str("catch");
            for (i, h) in handlers.iter().enumerate() {
                out.push('\n');
                indent(out, level + 1);
                let _ =
                    write!(out, "{}:{} ->", pattern_text(&h.class), pattern_text(&h.reason));
                write_body(out, &h.body, level + 2);
                if i + 1 < handlers.len() {
                    out.push(';');
                }
            }
            out.push('\n');
            indent(out, level);
            out.push_str("end");
        }
        Expr::Match { pattern, value, .. }
            if matches!(
                value.as_ref(),
                Expr::Block { .. } | Expr::Case { .. } | Expr::Try { .. }
            ) =>
        {
            let _ = write!(out, "{} = ", pattern_text(pattern));
            write_stmt(out, value, level);
        }
        other => out.push_str(&inline(other, 0)),
    }
}

fn case_clause_head(c: &Clause) -> String {
    let mut s = pattern_text(&c.patterns[0]);
    if !c.guard.is_empty() {
        let gs: Vec<String> = c.guard.iter().map(|e| inline(e, 0)).collect();
        let _ = write!(s, " when {}", gs.join(", "));
    }
    s.push_str(" ->");
    s
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::OrElse => 1,
        BinOp::AndAlso => 2,
        BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 3,
        BinOp::Append => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
    }
}

fn op_text(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "div",
        BinOp::Rem => "rem",
        BinOp::Append => "++",
        BinOp::Eq => "==",
        BinOp::Neq => "/=",
        BinOp::Lt => "<",
        BinOp::Gt => ">",
        BinOp::Le => "=<",
        BinOp::Ge => ">=",
        BinOp::AndAlso => "andalso",
        BinOp::OrElse => "orelse",
    }
}

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Match { .. } | Expr::TraceEmit { .. } => 0,
        Expr::BinOp { op, .. } => prec(*op),
        Expr::UnOp { .. } => 7,
        _ => 9,
    }
}

/// One-line rendering with minimal parentheses; `min` is the lowest
/// precedence this position accepts without parentheses.
fn inline(e: &Expr, min: u8) -> String {
    let body = inline_raw(e);
    if expr_prec(e) < min {
        format!("({})", body)
    } else {
        body
    }
}

fn inline_seq(es: &[Expr]) -> String {
    es.iter().map(|e| inline(e, 0)).collect::<Vec<_>>().join(", ")
}

fn inline_raw(e: &Expr) -> String {
    match e {
        Expr::Int { value, .. } => value.to_string(),
        Expr::Atom { name, .. } => atom_text(name),
        Expr::Str { codes, .. } => {
            let mut s = String::from("\"");
            for &c in codes {
                match u8::try_from(c).ok().map(char::from) {
                    Some('"') => s.push_str("\\\""),
                    Some('\\') => s.push_str("\\\\"),
                    Some('\n') => s.push_str("\\n"),
                    Some('\t') => s.push_str("\\t"),
                    Some(ch) if (32..127).contains(&(ch as u32)) => s.push(ch),
                    _ => s.push_str(&format!("\\{}", c)),
                }
            }
            s.push('"');
            s
        }
        Expr::Var { name, .. } => name.clone(),
        Expr::List { items, tail, .. } => {
            let items_s: Vec<String> = items.iter().map(|e| inline(e, 0)).collect();
            match tail {
                Some(t) => format!("[{} | {}]", items_s.join(", "), inline(t, 0)),
                None => format!("[{}]", items_s.join(", ")),
            }
        }
        Expr::Tuple { items, .. } => format!("{{{}}}", inline_seq(items)),
        Expr::BinOp { op, lhs, rhs, .. } => {
            let p = prec(*op);
            // `++` is right-associative, comparisons are non-associative,
            // everything else associates left.
            let (lmin, rmin) = match op {
                BinOp::Append => (p + 1, p),
                BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => {
                    (p + 1, p + 1)
                }
                _ => (p, p + 1),
            };
            format!("{} {} {}", inline(lhs, lmin), op_text(*op), inline(rhs, rmin))
        }
        Expr::UnOp { op, operand, .. } => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "not ",
            };
            format!("{}{}", sym, inline(operand, 7))
        }
        Expr::Call { target, args, .. } => {
            let head = match target {
                CallTarget::Local(name) => atom_text(name),
                CallTarget::Qualified(m, f) => format!("{}:{}", atom_text(m), atom_text(f)),
                CallTarget::Dynamic(e) => match e.as_ref() {
                    Expr::Var { name, .. } => name.clone(),
                    other => format!("({})", inline(other, 0)),
                },
            };
            format!("{}({})", head, inline_seq(args))
        }
        Expr::FunByName { module, name, arity, .. } => match module {
            Some(m) => format!("fun {}:{}/{}", atom_text(m), atom_text(name), arity),
            None => format!("fun {}/{}", atom_text(name), arity),
        },
        Expr::Lambda { lambda, .. } => {
            let clauses: Vec<String> = lambda
                .clauses
                .iter()
                .map(|c| {
                    let pats: Vec<String> = c.patterns.iter().map(pattern_text).collect();
                    let mut s = format!("({})", pats.join(", "));
                    if !c.guard.is_empty() {
                        let gs: Vec<String> = c.guard.iter().map(|e| inline(e, 0)).collect();
                        s.push_str(&format!(" when {}", gs.join(", ")));
                    }
                    format!("{} -> {}", s, inline_seq(&c.body))
                })
                .collect();
            format!("fun{} end", clauses.join("; "))
        }
        Expr::Case { scrutinee, clauses, .. } => {
            let clauses_s: Vec<String> = clauses
                .iter()
                .map(|c| format!("{} {}", case_clause_head(c), inline_seq(&c.body)))
                .collect();
            format!("case {} of {} end", inline(scrutinee, 0), clauses_s.join("; "))
        }
        Expr::If { clauses, .. } => {
            let clauses_s: Vec<String> = clauses
                .iter()
                .map(|(g, b)| {
                    let gs: Vec<String> = g.iter().map(|e| inline(e, 0)).collect();
                    format!("{} -> {}", gs.join(", "), inline_seq(b))
                })
                .collect();
            format!("if {} end", clauses_s.join("; "))
        }
        Expr::Match { pattern, value, .. } => {
            format!("{} = {}", pattern_text(pattern), inline(value, 0))
        }
        Expr::Lc { head, qualifiers, .. } => {
            let quals: Vec<String> = qualifiers
                .iter()
                .map(|q| match q {
                    Qualifier::Generator { pattern, source } => {
                        format!("{} <- {}", pattern_text(pattern), inline(source, 0))
                    }
                    Qualifier::Filter(e) => inline(e, 0),
                })
                .collect();
            format!("[{} || {}]", inline(head, 0), quals.join(", "))
        }
        Expr::Try { body, handlers, .. } => {
            let handlers_s: Vec<String> = handlers
                .iter()
                .map(|h| {
                    format!(
                        "{}:{} -> {}",
                        pattern_text(&h.class),
                        pattern_text(&h.reason),
                        inline_seq(&h.body)
                    )
                })
                .collect();
            format!("try {} catch {} end", inline_seq(body), handlers_s.join("; "))
        }
        Expr::Block { body, .. } => format!("begin {} end", inline_seq(body)),
        Expr::TraceEmit { spec, .. } => match spec {
            crate::syntax::ast::EmitSpec::Add { poi, value } => {
                format!("tracer ! {{add, {}, {}}}", poi, inline(value, 0))
            }
            crate::syntax::ast::EmitSpec::AddRef { poi, ref_expr, value } => format!(
                "tracer ! {{add, {}, {}, {}}}",
                poi,
                inline(ref_expr, 0),
                inline(value, 0)
            ),
            crate::syntax::ast::EmitSpec::AddI { poi, ref_expr, value } => format!(
                "tracer ! {{add_i, {}, {}, {}}}",
                poi,
                inline(ref_expr, 0),
                inline(value, 0)
            ),
            crate::syntax::ast::EmitSpec::Begin { ref_expr, frame } => {
                format!("tracer ! {{'begin', {}, {}}}", inline(ref_expr, 0), frame)
            }
            crate::syntax::ast::EmitSpec::End { ref_expr } => {
                format!("tracer ! {{'end', {}}}", inline(ref_expr, 0))
            }
        },
    }
}
