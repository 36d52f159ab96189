//! Runtime values and the total term order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use crate::syntax::ast::Lambda;
use crate::syntax::pretty::atom_text;

/// A MiniFun runtime value.
///
/// Strings are lists of character codes. Unique references compare equal
/// only to themselves. Closures compare by creation identity; two closures
/// are equal only when they are the same creation (within a run, or the same
/// creation index across deterministic runs).
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Atom(String),
    List(Vec<Value>),
    Tuple(Vec<Value>),
    /// `fun m:f/a` style reference to a named function.
    FunRef { module: String, name: String, arity: usize },
    Closure(Rc<ClosureData>),
    Ref(u64),
}

#[derive(Debug)]
pub struct ClosureData {
    pub id: u64,
    /// Module the lambda was created in; governs call resolution in its body.
    pub module: String,
    pub lambda: Lambda,
    pub captured: HashMap<String, Value>,
}

impl Value {
    pub fn atom(name: &str) -> Value {
        Value::Atom(name.to_string())
    }

    pub fn string(s: &str) -> Value {
        Value::List(s.bytes().map(|b| Value::Int(b as i64)).collect())
    }

    pub fn bool(b: bool) -> Value {
        Value::atom(if b { "true" } else { "false" })
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Atom(a) if a == "true" => Some(true),
            Value::Atom(a) if a == "false" => Some(false),
            _ => None,
        }
    }

    pub fn is_printable_string(&self) -> bool {
        match self {
            Value::List(items) if !items.is_empty() => {
                items.iter().all(|v| matches!(v, Value::Int(c) if (32..=126).contains(c)))
            }
            _ => false,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        term_cmp(self, other) == Ordering::Equal
    }
}

impl Eq for Value {}

fn type_rank(v: &Value) -> u8 {
    match v {
        Value::Int(_) => 0,
        Value::Atom(_) => 1,
        Value::Ref(_) => 2,
        Value::FunRef { .. } | Value::Closure(_) => 3,
        Value::Tuple(_) => 4,
        Value::List(_) => 5,
    }
}

/// Total order over values: number < atom < reference < fun < tuple < list.
///
/// Tuples order by size first, then elementwise; lists compare elementwise
/// with a proper prefix ordering before longer lists.
pub fn term_cmp(a: &Value, b: &Value) -> Ordering {
    let (ra, rb) = (type_rank(a), type_rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Atom(x), Value::Atom(y)) => x.cmp(y),
        (Value::Ref(x), Value::Ref(y)) => x.cmp(y),
        (Value::FunRef { module: m1, name: n1, arity: a1 }, Value::FunRef { module: m2, name: n2, arity: a2 }) => {
            (m1, n1, a1).cmp(&(m2, n2, a2))
        }
        (Value::FunRef { .. }, Value::Closure(_)) => Ordering::Less,
        (Value::Closure(_), Value::FunRef { .. }) => Ordering::Greater,
        (Value::Closure(x), Value::Closure(y)) => x.id.cmp(&y.id),
        (Value::Tuple(x), Value::Tuple(y)) => match x.len().cmp(&y.len()) {
            Ordering::Equal => seq_cmp(x, y),
            other => other,
        },
        (Value::List(x), Value::List(y)) => match seq_cmp(x, y) {
            Ordering::Equal => x.len().cmp(&y.len()),
            other => other,
        },
        _ => unreachable!("rank-equal values of different shapes"),
    }
}

fn seq_cmp(a: &[Value], b: &[Value]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match term_cmp(x, y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

impl fmt::Display for Value {
    /// MiniFun literal syntax; integer lists print as quoted strings when
    /// non-empty and every element is a printable character code.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{}", n),
            Value::Atom(a) => write!(f, "{}", atom_text(a)),
            Value::List(items) => {
                if self.is_printable_string() {
                    write!(f, "\"")?;
                    for v in items {
                        if let Value::Int(c) = v {
                            let ch = *c as u8 as char;
                            if ch == '"' || ch == '\\' {
                                write!(f, "\\")?;
                            }
                            write!(f, "{}", ch)?;
                        }
                    }
                    write!(f, "\"")
                } else {
                    write!(f, "[")?;
                    for (i, v) in items.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{}", v)?;
                    }
                    write!(f, "]")
                }
            }
            Value::Tuple(items) => {
                write!(f, "{{")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", v)?;
                }
                write!(f, "}}")
            }
            Value::FunRef { module, name, arity } => {
                write!(f, "fun {}:{}/{}", atom_text(module), atom_text(name), arity)
            }
            Value::Closure(_) => write!(f, "#fun"),
            Value::Ref(n) => write!(f, "#ref<{}>", n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strings_print_quoted_when_printable() {
        assert_eq!(Value::string("Given      ").to_string(), "\"Given      \"");
        assert_eq!(Value::List(vec![]).to_string(), "[]");
        assert_eq!(
            Value::List(vec![Value::Int(5), Value::Int(10)]).to_string(),
            "[5,10]"
        );
        // A 'dollar' word keeps its inner quotes untouched.
        assert_eq!(Value::string("'dollar' ").to_string(), "\"'dollar' \"");
    }

    #[test]
    fn tuples_and_nested_lists() {
        let v = Value::Tuple(vec![Value::Int(1), Value::string("ab")]);
        assert_eq!(v.to_string(), "{1,\"ab\"}");
        let v = Value::List(vec![Value::List(vec![]), Value::string("lin")]);
        assert_eq!(v.to_string(), "[[],\"lin\"]");
    }

    #[test]
    fn term_order_ranks_types() {
        use Ordering::*;
        assert_eq!(term_cmp(&Value::Int(99), &Value::atom("a")), Less);
        assert_eq!(term_cmp(&Value::atom("z"), &Value::Tuple(vec![])), Less);
        assert_eq!(term_cmp(&Value::Tuple(vec![Value::Int(9)]), &Value::List(vec![])), Less);
        // Lists compare lexicographically with prefix-first.
        let l12 = Value::List(vec![Value::Int(1), Value::Int(2)]);
        let l123 = Value::List(vec![Value::Int(1), Value::Int(2), Value::Int(3)]);
        assert_eq!(term_cmp(&l12, &l123), Less);
        // Tuples compare by size first.
        let t3 = Value::Tuple(vec![Value::Int(0), Value::Int(0), Value::Int(0)]);
        let t2 = Value::Tuple(vec![Value::Int(9), Value::Int(9)]);
        assert_eq!(term_cmp(&t2, &t3), Less);
    }

    #[test]
    fn refs_equal_only_to_themselves() {
        assert_eq!(Value::Ref(3), Value::Ref(3));
        assert_ne!(Value::Ref(3), Value::Ref(4));
    }
}
