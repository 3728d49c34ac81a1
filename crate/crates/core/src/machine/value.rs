//! Runtime values.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use num_bigint::BigInt;

use super::compile::{Expr, Lambda};
use super::eval::Kont;
use super::syntax::{write_char_literal, write_real, write_string_literal, Datum};
use crate::intern::Atom;

/// A Scheme value. Procedures refer to environment frames of the evaluation
/// that created them and are opaque once that evaluation has finished.
#[derive(Clone)]
pub enum Value {
    Int(i64),
    Big(Rc<BigInt>),
    Real(f64),
    Bool(bool),
    Sym(Atom),
    Str(Rc<str>),
    Char(char),
    Pair(Rc<(Value, Value)>),
    Nil,
    Closure(Rc<Closure>),
    Builtin(u16),
    Continuation(Rc<Vec<Kont>>),
    Promise(Rc<RefCell<Promise>>),
    Values(Rc<[Value]>),
    Unspecified,
}

pub type SchemeValue = Value;

pub struct Closure {
    pub lambda: Rc<Lambda>,
    pub env: u32,
}

pub enum Promise {
    Delayed(Rc<Expr>, u32),
    Forced(Value),
}

impl Value {
    pub fn integer(n: BigInt) -> Value {
        match i64::try_from(&n) {
            Ok(small) => Value::Int(small),
            Err(_) => Value::Big(Rc::new(n)),
        }
    }

    pub fn string(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn is_true(&self) -> bool {
        !matches!(self, Value::Bool(false))
    }

    pub fn is_number(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Big(_) | Value::Real(_))
    }

    pub fn is_procedure(&self) -> bool {
        matches!(self, Value::Closure(_) | Value::Builtin(_) | Value::Continuation(_))
    }

    pub fn cons(car: Value, cdr: Value) -> Value {
        Value::Pair(Rc::new((car, cdr)))
    }

    pub fn list(items: impl IntoIterator<Item = Value, IntoIter: DoubleEndedIterator>) -> Value {
        items.into_iter().rev().fold(Value::Nil, |acc, v| Value::cons(v, acc))
    }

    /// Elements of a proper list, or `None` for improper/non-lists.
    pub fn list_items(&self) -> Option<Vec<Value>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Value::Nil => return Some(out),
                Value::Pair(p) => {
                    out.push(p.0.clone());
                    cur = &p.1;
                }
                _ => return None,
            }
        }
    }

    pub fn from_datum(d: &Datum) -> Value {
        match d {
            Datum::Int(n) => Value::Int(*n),
            Datum::Big(n) => Value::Big(Rc::new(n.clone())),
            Datum::Real(x) => Value::Real(*x),
            Datum::Bool(b) => Value::Bool(*b),
            Datum::Char(c) => Value::Char(*c),
            Datum::Str(s) => Value::string(s),
            Datum::Sym(a) => Value::Sym(*a),
            Datum::List(items) => Value::list(items.iter().map(Value::from_datum).collect::<Vec<_>>()),
            Datum::Dotted(items, tail) => {
                items.iter().rev().fold(Value::from_datum(tail), |acc, d| Value::cons(Value::from_datum(d), acc))
            }
        }
    }

    /// Ground values convert back to data; procedures and other opaque values do not.
    pub fn to_datum(&self) -> Option<Datum> {
        Some(match self {
            Value::Int(n) => Datum::Int(*n),
            Value::Big(n) => Datum::Big((**n).clone()),
            Value::Real(x) => Datum::Real(*x),
            Value::Bool(b) => Datum::Bool(*b),
            Value::Char(c) => Datum::Char(*c),
            Value::Str(s) => Datum::Str(s.to_string()),
            Value::Sym(a) => Datum::Sym(*a),
            Value::Nil => Datum::List(Vec::new()),
            Value::Pair(_) => {
                let mut items = Vec::new();
                let mut cur = self.clone();
                loop {
                    match cur {
                        Value::Pair(p) => {
                            items.push(p.0.to_datum()?);
                            cur = p.1.clone();
                        }
                        Value::Nil => break Datum::List(items),
                        tail => break Datum::Dotted(items, Box::new(tail.to_datum()?)),
                    }
                }
            }
            _ => return None,
        })
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) | Value::Big(_) => "integer",
            Value::Real(_) => "real",
            Value::Bool(_) => "boolean",
            Value::Sym(_) => "symbol",
            Value::Str(_) => "string",
            Value::Char(_) => "character",
            Value::Pair(_) => "pair",
            Value::Nil => "empty list",
            Value::Closure(_) | Value::Builtin(_) | Value::Continuation(_) => "procedure",
            Value::Promise(_) => "promise",
            Value::Values(_) => "multiple values",
            Value::Unspecified => "unspecified",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Big(n) => write!(f, "{n}"),
            Value::Real(x) => write_real(f, *x),
            Value::Bool(true) => f.write_str("#t"),
            Value::Bool(false) => f.write_str("#f"),
            Value::Sym(a) => write!(f, "{a}"),
            Value::Str(s) => write_string_literal(f, s),
            Value::Char(c) => write_char_literal(f, *c),
            Value::Nil => f.write_str("()"),
            Value::Pair(p) => {
                write!(f, "({}", p.0)?;
                let mut cur = &p.1;
                loop {
                    match cur {
                        Value::Nil => break,
                        Value::Pair(q) => {
                            write!(f, " {}", q.0)?;
                            cur = &q.1;
                        }
                        tail => {
                            write!(f, " . {tail}")?;
                            break;
                        }
                    }
                }
                f.write_str(")")
            }
            Value::Closure(_) | Value::Builtin(_) | Value::Continuation(_) => f.write_str("#<procedure>"),
            Value::Promise(_) => f.write_str("#<promise>"),
            Value::Values(vs) => {
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            Value::Unspecified => f.write_str("#<unspecified>"),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `eqv?`: identity for compound objects, value equality with matching
/// exactness for numbers.
pub fn eqv(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Big(x), Value::Big(y)) => x == y,
        (Value::Real(x), Value::Real(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Sym(x), Value::Sym(y)) => x == y,
        (Value::Char(x), Value::Char(y)) => x == y,
        (Value::Nil, Value::Nil) => true,
        (Value::Unspecified, Value::Unspecified) => true,
        (Value::Str(x), Value::Str(y)) => Rc::ptr_eq(x, y),
        (Value::Pair(x), Value::Pair(y)) => Rc::ptr_eq(x, y),
        (Value::Closure(x), Value::Closure(y)) => Rc::ptr_eq(x, y),
        (Value::Builtin(x), Value::Builtin(y)) => x == y,
        (Value::Continuation(x), Value::Continuation(y)) => Rc::ptr_eq(x, y),
        (Value::Promise(x), Value::Promise(y)) => Rc::ptr_eq(x, y),
        _ => false,
    }
}

/// `equal?`: structural on pairs and strings, `eqv?` elsewhere.
pub fn equal(a: &Value, b: &Value) -> bool {
    let (mut a, mut b) = (a.clone(), b.clone());
    loop {
        match (&a, &b) {
            (Value::Pair(x), Value::Pair(y)) => {
                if !equal(&x.0, &y.0) {
                    return false;
                }
                let (na, nb) = (x.1.clone(), y.1.clone());
                a = na;
                b = nb;
            }
            (Value::Str(x), Value::Str(y)) => return x == y,
            _ => return eqv(&a, &b),
        }
    }
}
