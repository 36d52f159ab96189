//! Builtin catalogue.
//!
//! Pure builtins are applied through [`builtin_apply`] under canonical names
//! (`pad_left`, `max_list`, ...). Surface code reaches them unqualified
//! (auto-imported) or through the reserved `lists`, `string` and `erlang`
//! module names; `apply`, `make_ref`, `error` and the higher-order list
//! functions need evaluator context and are dispatched by the machine.

use super::machine::RuntimeError;
use super::value::{term_cmp, Value};

/// How a resolved builtin is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// Handled by [`builtin_apply`] under the given canonical name.
    Pure(&'static str),
    Apply,
    MakeRef,
    Error1,
    Error2,
    Throw,
    Foldl,
    Map,
}

/// Resolve a surface-level call to a builtin. `module` is `None` for
/// unqualified (auto-imported) calls.
pub fn lookup(module: Option<&str>, name: &str, arity: usize) -> Option<Builtin> {
    use Builtin::*;
    let b = match (module, name, arity) {
        (None | Some("erlang"), "length", 1) => Pure("length"),
        (None | Some("erlang"), "hd", 1) => Pure("hd"),
        (None | Some("erlang"), "tl", 1) => Pure("tl"),
        (None | Some("erlang"), "abs", 1) => Pure("abs"),
        (None | Some("erlang"), "element", 2) => Pure("element"),
        (None | Some("erlang"), "tuple_size", 1) => Pure("tuple_size"),
        (None | Some("erlang"), "is_integer", 1) => Pure("is_integer"),
        (None | Some("erlang"), "is_atom", 1) => Pure("is_atom"),
        (None | Some("erlang"), "is_list", 1) => Pure("is_list"),
        (None | Some("erlang"), "is_tuple", 1) => Pure("is_tuple"),
        (None | Some("erlang"), "is_function", 1) => Pure("is_function"),
        (None | Some("erlang"), "apply", 3) => Apply,
        (None | Some("erlang"), "make_ref", 0) => MakeRef,
        (None | Some("erlang"), "error", 1) => Error1,
        (None | Some("erlang"), "error", 2) => Error2,
        (None | Some("erlang"), "throw", 1) => Throw,
        (Some("lists"), "reverse", 1) => Pure("reverse"),
        (Some("lists"), "max", 1) => Pure("max_list"),
        (Some("lists"), "min", 1) => Pure("min_list"),
        (Some("lists"), "zip", 2) => Pure("zip"),
        (Some("lists"), "duplicate", 2) => Pure("duplicate"),
        (Some("lists"), "member", 2) => Pure("member"),
        (Some("lists"), "sum", 1) => Pure("sum"),
        (Some("lists"), "seq", 2) => Pure("seq"),
        (Some("lists"), "nth", 2) => Pure("nth"),
        (Some("lists"), "sublist", 2) => Pure("sublist"),
        (Some("lists"), "foldl", 3) => Foldl,
        (Some("lists"), "map", 2) => Map,
        (Some("string"), "tokens", 2) => Pure("tokens"),
        (Some("string"), "left", 3) => Pure("pad_left"),
        (Some("string"), "right", 3) => Pure("pad_right"),
        (Some("string"), "centre", 3) => Pure("pad_centre"),
        _ => return None,
    };
    Some(b)
}

fn badarg(name: &str) -> RuntimeError {
    RuntimeError { class: "badarg".into(), reason: Value::atom(name), pos: None }
}

fn as_list<'v>(v: &'v Value, name: &str) -> Result<&'v [Value], RuntimeError> {
    match v {
        Value::List(items) => Ok(items),
        _ => Err(badarg(name)),
    }
}

fn as_int(v: &Value, name: &str) -> Result<i64, RuntimeError> {
    match v {
        Value::Int(n) => Ok(*n),
        _ => Err(badarg(name)),
    }
}

/// Apply a pure builtin by canonical name.
///
/// Total on the stated domains; `badarg` on domain violations, `undef` on
/// unknown names.
pub fn builtin_apply(name: &str, args: &[Value]) -> Result<Value, RuntimeError> {
    match (name, args) {
        ("length", [v]) => Ok(Value::Int(as_list(v, name)?.len() as i64)),
        ("hd", [v]) => as_list(v, name)?.first().cloned().ok_or_else(|| badarg(name)),
        ("tl", [v]) => {
            let items = as_list(v, name)?;
            if items.is_empty() {
                Err(badarg(name))
            } else {
                Ok(Value::List(items[1..].to_vec()))
            }
        }
        ("abs", [v]) => Ok(Value::Int(as_int(v, name)?.checked_abs().ok_or_else(|| badarg(name))?)),
        ("element", [n, t]) => {
            let n = as_int(n, name)?;
            match t {
                Value::Tuple(items) if n >= 1 && (n as usize) <= items.len() => {
                    Ok(items[n as usize - 1].clone())
                }
                _ => Err(badarg(name)),
            }
        }
        ("tuple_size", [Value::Tuple(items)]) => Ok(Value::Int(items.len() as i64)),
        ("is_integer", [v]) => Ok(Value::bool(matches!(v, Value::Int(_)))),
        ("is_atom", [v]) => Ok(Value::bool(matches!(v, Value::Atom(_)))),
        ("is_list", [v]) => Ok(Value::bool(matches!(v, Value::List(_)))),
        ("is_tuple", [v]) => Ok(Value::bool(matches!(v, Value::Tuple(_)))),
        ("is_function", [v]) => {
            Ok(Value::bool(matches!(v, Value::Closure(_) | Value::FunRef { .. })))
        }
        ("reverse", [v]) => {
            let mut items = as_list(v, name)?.to_vec();
            items.reverse();
            Ok(Value::List(items))
        }
        ("max_list", [v]) => extremum(as_list(v, name)?, name, std::cmp::Ordering::Greater),
        ("min_list", [v]) => extremum(as_list(v, name)?, name, std::cmp::Ordering::Less),
        ("zip", [a, b]) => {
            let (a, b) = (as_list(a, name)?, as_list(b, name)?);
            if a.len() != b.len() {
                return Err(badarg(name));
            }
            Ok(Value::List(
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| Value::Tuple(vec![x.clone(), y.clone()]))
                    .collect(),
            ))
        }
        ("duplicate", [n, e]) => {
            let n = as_int(n, name)?;
            if n < 0 {
                return Err(badarg(name));
            }
            Ok(Value::List(std::iter::repeat(e.clone()).take(n as usize).collect()))
        }
        ("member", [e, l]) => Ok(Value::bool(as_list(l, name)?.contains(e))),
        ("sum", [l]) => {
            let mut acc: i64 = 0;
            for v in as_list(l, name)? {
                acc = acc.checked_add(as_int(v, name)?).ok_or_else(|| badarg(name))?;
            }
            Ok(Value::Int(acc))
        }
        ("seq", [a, b]) => {
            let (a, b) = (as_int(a, name)?, as_int(b, name)?);
            if b < a - 1 {
                return Err(badarg(name));
            }
            Ok(Value::List((a..=b).map(Value::Int).collect()))
        }
        ("nth", [n, l]) => {
            let n = as_int(n, name)?;
            let items = as_list(l, name)?;
            if n >= 1 && (n as usize) <= items.len() {
                Ok(items[n as usize - 1].clone())
            } else {
                Err(badarg(name))
            }
        }
        ("sublist", [l, n]) => {
            let items = as_list(l, name)?;
            let n = as_int(n, name)?.max(0) as usize;
            Ok(Value::List(items.iter().take(n).cloned().collect()))
        }
        ("tokens", [s, seps]) => tokens(as_list(s, name)?, as_list(seps, name)?),
        ("pad_left", [s, n, c]) => {
            let items = as_list(s, name)?;
            let n = width(n, name)?;
            let mut out: Vec<Value> = items.iter().take(n).cloned().collect();
            while out.len() < n {
                out.push(c.clone());
            }
            Ok(Value::List(out))
        }
        ("pad_right", [s, n, c]) => {
            let items = as_list(s, name)?;
            let n = width(n, name)?;
            let keep = items.len().min(n);
            let mut out: Vec<Value> = Vec::with_capacity(n);
            for _ in 0..n - keep {
                out.push(c.clone());
            }
            out.extend(items[items.len() - keep..].iter().cloned());
            Ok(Value::List(out))
        }
        ("pad_centre", [s, n, c]) => {
            let items = as_list(s, name)?;
            let n = width(n, name)?;
            if items.len() >= n {
                return Ok(Value::List(items.iter().take(n).cloned().collect()));
            }
            let pad = n - items.len();
            let left = pad / 2;
            let mut out: Vec<Value> = Vec::with_capacity(n);
            for _ in 0..left {
                out.push(c.clone());
            }
            out.extend(items.iter().cloned());
            for _ in 0..pad - left {
                out.push(c.clone());
            }
            Ok(Value::List(out))
        }
        _ => Err(RuntimeError {
            class: "undef".into(),
            reason: Value::Tuple(vec![Value::atom(name), Value::Int(args.len() as i64)]),
            pos: None,
        }),
    }
}

fn width(v: &Value, name: &str) -> Result<usize, RuntimeError> {
    let n = as_int(v, name)?;
    if n < 0 {
        Err(badarg(name))
    } else {
        Ok(n as usize)
    }
}

fn extremum(items: &[Value], name: &str, want: std::cmp::Ordering) -> Result<Value, RuntimeError> {
    let mut best = items.first().ok_or_else(|| badarg(name))?;
    for v in &items[1..] {
        if term_cmp(v, best) == want {
            best = v;
        }
    }
    Ok(best.clone())
}

/// Split `s` at any separator character, dropping empty fields.
fn tokens(s: &[Value], seps: &[Value]) -> Result<Value, RuntimeError> {
    let mut out: Vec<Value> = Vec::new();
    let mut current: Vec<Value> = Vec::new();
    for v in s {
        if seps.contains(v) {
            if !current.is_empty() {
                out.push(Value::List(std::mem::take(&mut current)));
            }
        } else {
            current.push(v.clone());
        }
    }
    if !current.is_empty() {
        out.push(Value::List(current));
    }
    Ok(Value::List(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_left_pads_and_truncates() {
        // Width 11 pads "Given" with six fill characters.
        let v =
            builtin_apply("pad_left", &[Value::string("Given"), Value::Int(11), Value::Int(32)])
                .unwrap();
        assert_eq!(v.to_string(), "\"Given      \"");
        // Width below the length truncates.
        let v = builtin_apply("pad_left", &[Value::string("Given"), Value::Int(4), Value::Int(32)])
            .unwrap();
        assert_eq!(v.to_string(), "\"Give\"");
        // Width zero produces the empty list.
        let v = builtin_apply("pad_left", &[Value::string("a"), Value::Int(0), Value::Int(32)])
            .unwrap();
        assert_eq!(v, Value::List(vec![]));
    }

    #[test]
    fn tokens_drops_empty_fields() {
        let v = builtin_apply("tokens", &[Value::string("a$b$$c"), Value::string("$")]).unwrap();
        assert_eq!(v, Value::List(vec![Value::string("a"), Value::string("b"), Value::string("c")]));
        // Trailing separators leave no empty trailing field.
        let v = builtin_apply("tokens", &[Value::string("x$"), Value::string("$")]).unwrap();
        assert_eq!(v, Value::List(vec![Value::string("x")]));
    }

    #[test]
    fn zip_pairs_equal_length_lists() {
        let v = builtin_apply("zip", &[
            Value::List(vec![Value::Int(1)]),
            Value::List(vec![Value::Int(2)]),
        ])
        .unwrap();
        assert_eq!(v, Value::List(vec![Value::Tuple(vec![Value::Int(1), Value::Int(2)])]));
        let err = builtin_apply("zip", &[
            Value::List(vec![Value::Int(1)]),
            Value::List(vec![]),
        ])
        .unwrap_err();
        assert_eq!(err.class, "badarg");
    }

    #[test]
    fn unknown_name_is_undef() {
        assert_eq!(builtin_apply("no_such", &[]).unwrap_err().class, "undef");
    }

    #[test]
    fn max_list_uses_term_order() {
        let v = builtin_apply("max_list", &[Value::List(vec![Value::Int(3), Value::Int(9)])])
            .unwrap();
        assert_eq!(v, Value::Int(9));
        assert_eq!(builtin_apply("max_list", &[Value::List(vec![])]).unwrap_err().class, "badarg");
    }
}
