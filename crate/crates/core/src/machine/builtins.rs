//! Standard procedures. The set and arities come from `data/stdlib.manifest`;
//! every manifest entry must have an implementation here.

use std::cmp::Ordering;
use std::rc::Rc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use once_cell::sync::Lazy;

use super::syntax::{parse_number, Datum};
use super::value::{equal, eqv, Value};
use crate::intern::Atom;

pub const MANIFEST: &str = include_str!("../../data/stdlib.manifest");

/// Results larger than this many bits raise an error instead of exhausting memory.
pub const MAX_INTEGER_BITS: u64 = 1 << 16;
/// Upper bound on `make-string` lengths.
const MAX_STRING_LEN: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Fixed(usize),
    AtLeast(usize),
    /// Optional trailing arguments: between `min` and `max` inclusive.
    Range(usize, usize),
}

impl Arity {
    pub fn min(self) -> usize {
        match self {
            Arity::Fixed(n) | Arity::AtLeast(n) | Arity::Range(n, _) => n,
        }
    }

    pub fn max(self) -> Option<usize> {
        match self {
            Arity::Fixed(n) | Arity::Range(_, n) => Some(n),
            Arity::AtLeast(_) => None,
        }
    }

    pub fn accepts(self, n: usize) -> bool {
        n >= self.min() && self.max().is_none_or(|m| n <= m)
    }
}

pub type Simple = fn(&[Value]) -> Result<Value, String>;

/// Builtins that need the evaluator (they call procedures or capture control).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Special {
    Apply,
    Map,
    ForEach,
    Force,
    CallCc,
    Values,
    CallWithValues,
}

#[derive(Clone, Copy)]
pub enum Kind {
    Simple(Simple),
    Special(Special),
}

pub struct Builtin {
    pub name: Atom,
    pub arity: Arity,
    pub kind: Kind,
}

pub struct Table {
    pub entries: Vec<Builtin>,
    by_atom: Vec<u16>,
}

impl Table {
    pub fn lookup(&self, atom: Atom) -> Option<u16> {
        self.by_atom.get(atom.index()).copied().filter(|&i| i != u16::MAX)
    }

    pub fn get(&self, id: u16) -> &Builtin {
        &self.entries[id as usize]
    }
}

/// Parsed manifest lines: `(name, arity)` in file order.
pub fn manifest_entries() -> Vec<(String, Arity)> {
    MANIFEST
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let mut parts = line.split_whitespace();
            let name = parts.next().expect("manifest name").to_string();
            let min: usize = parts.next().and_then(|s| s.parse().ok()).expect("manifest min arity");
            let arity = match parts.next().expect("manifest max arity") {
                "*" => Arity::AtLeast(min),
                s => {
                    let max: usize = s.parse().expect("manifest max arity");
                    if max == min {
                        Arity::Fixed(min)
                    } else {
                        Arity::Range(min, max)
                    }
                }
            };
            (name, arity)
        })
        .collect()
}

pub static TABLE: Lazy<Table> = Lazy::new(|| {
    let mut entries = Vec::new();
    for (name, arity) in manifest_entries() {
        let kind = implementation(&name).unwrap_or_else(|| panic!("no implementation for `{name}`"));
        entries.push(Builtin { name: Atom::new(&name), arity, kind });
    }
    let size = entries.iter().map(|b| b.name.index() + 1).max().unwrap_or(0);
    let mut by_atom = vec![u16::MAX; size];
    for (i, b) in entries.iter().enumerate() {
        by_atom[b.name.index()] = u16::try_from(i).expect("too many builtins");
    }
    Table { entries, by_atom }
});

fn implementation(name: &str) -> Option<Kind> {
    use Kind::{Simple as S, Special as X};
    Some(match name {
        "number?" | "complex?" | "real?" => S(|a| Ok(Value::Bool(a[0].is_number()))),
        "rational?" => S(|a| {
            Ok(Value::Bool(match &a[0] {
                Value::Real(x) => x.is_finite(),
                v => v.is_number(),
            }))
        }),
        "integer?" => S(|a| {
            Ok(Value::Bool(match &a[0] {
                Value::Int(_) | Value::Big(_) => true,
                Value::Real(x) => x.is_finite() && x.fract() == 0.0,
                _ => false,
            }))
        }),
        "exact?" => S(|a| num(&a[0]).map(|_| Value::Bool(!matches!(a[0], Value::Real(_))))),
        "inexact?" => S(|a| num(&a[0]).map(|_| Value::Bool(matches!(a[0], Value::Real(_))))),
        "=" => S(|a| compare_chain(a, |o| o == Ordering::Equal)),
        "<" => S(|a| compare_chain(a, |o| o == Ordering::Less)),
        ">" => S(|a| compare_chain(a, |o| o == Ordering::Greater)),
        "<=" => S(|a| compare_chain(a, |o| o != Ordering::Greater)),
        ">=" => S(|a| compare_chain(a, |o| o != Ordering::Less)),
        "zero?" => S(|a| sign(&a[0]).map(|s| Value::Bool(s == Some(Ordering::Equal)))),
        "positive?" => S(|a| sign(&a[0]).map(|s| Value::Bool(s == Some(Ordering::Greater)))),
        "negative?" => S(|a| sign(&a[0]).map(|s| Value::Bool(s == Some(Ordering::Less)))),
        "odd?" => S(|a| Ok(Value::Bool(!integer_arg(&a[0])?.is_even()))),
        "even?" => S(|a| Ok(Value::Bool(integer_arg(&a[0])?.is_even()))),
        "max" => S(|a| extremum(a, Ordering::Greater)),
        "min" => S(|a| extremum(a, Ordering::Less)),
        "+" => S(|a| a.iter().try_fold(Value::Int(0), |acc, v| add(&acc, v))),
        "*" => S(|a| a.iter().try_fold(Value::Int(1), |acc, v| mul(&acc, v))),
        "-" => S(|a| match a {
            [x] => sub(&Value::Int(0), x),
            [x, rest @ ..] => rest.iter().try_fold(x.clone(), |acc, v| sub(&acc, v)),
            [] => unreachable!(),
        }),
        "/" => S(|a| match a {
            [x] => div(&Value::Int(1), x),
            [x, rest @ ..] => rest.iter().try_fold(x.clone(), |acc, v| div(&acc, v)),
            [] => unreachable!(),
        }),
        "abs" => S(|a| match &a[0] {
            Value::Int(n) => {
                Ok(n.checked_abs().map(Value::Int).unwrap_or_else(|| Value::integer(BigInt::from(*n).abs())))
            }
            Value::Big(n) => Ok(Value::integer(n.abs())),
            Value::Real(x) => Ok(Value::Real(x.abs())),
            v => Err(type_error("number", v)),
        }),
        "quotient" => S(|a| int_division(a, |x, y| x / y)),
        "remainder" => S(|a| int_division(a, |x, y| x % y)),
        "modulo" => S(|a| int_division(a, |x, y| x.mod_floor(y))),
        "gcd" => S(|a| a.iter().try_fold(Value::Int(0), |acc, v| Ok(Value::integer(exact(&acc)?.gcd(&exact(v)?))))),
        "lcm" => S(|a| a.iter().try_fold(Value::Int(1), |acc, v| Ok(Value::integer(exact(&acc)?.lcm(&exact(v)?))))),
        "floor" => S(|a| rounding(&a[0], f64::floor)),
        "ceiling" => S(|a| rounding(&a[0], f64::ceil)),
        "truncate" => S(|a| rounding(&a[0], f64::trunc)),
        "round" => S(|a| rounding(&a[0], f64::round_ties_even)),
        "exp" => S(|a| real_fn(&a[0], f64::exp)),
        "log" => S(|a| {
            let x = to_f64(&a[0])?;
            if x < 0.0 {
                return Err("log of a negative number".into());
            }
            Ok(Value::Real(x.ln()))
        }),
        "sin" => S(|a| real_fn(&a[0], f64::sin)),
        "cos" => S(|a| real_fn(&a[0], f64::cos)),
        "tan" => S(|a| real_fn(&a[0], f64::tan)),
        "asin" => S(|a| real_fn(&a[0], f64::asin)),
        "acos" => S(|a| real_fn(&a[0], f64::acos)),
        "atan" => S(|a| match a {
            [y] => real_fn(y, f64::atan),
            [y, x] => Ok(Value::Real(to_f64(y)?.atan2(to_f64(x)?))),
            _ => unreachable!(),
        }),
        "sqrt" => S(|a| sqrt(&a[0])),
        "expt" => S(|a| expt(&a[0], &a[1])),
        "exact->inexact" => S(|a| Ok(Value::Real(to_f64(&a[0])?))),
        "inexact->exact" => S(|a| match &a[0] {
            Value::Real(x) if x.is_finite() && x.fract() == 0.0 => {
                Ok(Value::integer(BigInt::from_f64(*x).expect("finite integral real")))
            }
            Value::Real(_) => Err("no exact representation (rationals unsupported)".into()),
            v => num(v).map(|_| v.clone()),
        }),
        "number->string" => S(|a| {
            let radix = match a.get(1) {
                None => 10,
                Some(r) => radix(r)?,
            };
            match &a[0] {
                Value::Real(_) if radix != 10 => Err("inexact numbers print in radix 10 only".into()),
                Value::Real(_) => Ok(Value::string(&a[0].to_string())),
                v => Ok(Value::string(&exact(v)?.to_str_radix(radix))),
            }
        }),
        "string->number" => S(|a| {
            let s = string_arg(&a[0])?;
            let radix = match a.get(1) {
                None => 10,
                Some(r) => radix(r)?,
            };
            if radix == 10 {
                return Ok(match parse_number(&s) {
                    Some(d) => Value::from_datum(&d),
                    None => Value::Bool(false),
                });
            }
            Ok(BigInt::parse_bytes(s.as_bytes(), radix).map(Value::integer).unwrap_or(Value::Bool(false)))
        }),
        "not" => S(|a| Ok(Value::Bool(matches!(a[0], Value::Bool(false))))),
        "boolean?" => S(|a| Ok(Value::Bool(matches!(a[0], Value::Bool(_))))),
        "eq?" | "eqv?" => S(|a| Ok(Value::Bool(eqv(&a[0], &a[1])))),
        "equal?" => S(|a| Ok(Value::Bool(equal(&a[0], &a[1])))),
        "pair?" => S(|a| Ok(Value::Bool(matches!(a[0], Value::Pair(_))))),
        "cons" => S(|a| Ok(Value::cons(a[0].clone(), a[1].clone()))),
        "car" => S(|a| cxr(&a[0], "a")),
        "cdr" => S(|a| cxr(&a[0], "d")),
        "caar" => S(|a| cxr(&a[0], "aa")),
        "cadr" => S(|a| cxr(&a[0], "da")),
        "cdar" => S(|a| cxr(&a[0], "ad")),
        "cddr" => S(|a| cxr(&a[0], "dd")),
        "caaar" => S(|a| cxr(&a[0], "aaa")),
        "caadr" => S(|a| cxr(&a[0], "daa")),
        "cadar" => S(|a| cxr(&a[0], "ada")),
        "caddr" => S(|a| cxr(&a[0], "dda")),
        "cdaar" => S(|a| cxr(&a[0], "aad")),
        "cdadr" => S(|a| cxr(&a[0], "dad")),
        "cddar" => S(|a| cxr(&a[0], "add")),
        "cdddr" => S(|a| cxr(&a[0], "ddd")),
        "null?" => S(|a| Ok(Value::Bool(matches!(a[0], Value::Nil)))),
        "list?" => S(|a| Ok(Value::Bool(a[0].list_items().is_some()))),
        "list" => S(|a| Ok(Value::list(a.to_vec()))),
        "length" => S(|a| Ok(Value::Int(proper_list(&a[0])?.len() as i64))),
        "append" => S(append),
        "reverse" => S(|a| Ok(proper_list(&a[0])?.into_iter().fold(Value::Nil, |acc, v| Value::cons(v, acc)))),
        "list-tail" => S(|a| list_tail(&a[0], &a[1])),
        "list-ref" => S(|a| match list_tail(&a[0], &a[1])? {
            Value::Pair(p) => Ok(p.0.clone()),
            _ => Err("list-ref: index out of range".into()),
        }),
        "memq" | "memv" => S(|a| member(&a[0], &a[1], eqv)),
        "member" => S(|a| member(&a[0], &a[1], equal)),
        "assq" | "assv" => S(|a| assoc(&a[0], &a[1], eqv)),
        "assoc" => S(|a| assoc(&a[0], &a[1], equal)),
        "symbol?" => S(|a| Ok(Value::Bool(matches!(a[0], Value::Sym(_))))),
        "symbol->string" => S(|a| match &a[0] {
            Value::Sym(s) => Ok(Value::string(&s.name())),
            v => Err(type_error("symbol", v)),
        }),
        "string->symbol" => S(|a| Ok(Value::Sym(Atom::new(&string_arg(&a[0])?)))),
        "char?" => S(|a| Ok(Value::Bool(matches!(a[0], Value::Char(_))))),
        "char=?" => S(|a| char_chain(a, |o| o == Ordering::Equal)),
        "char<?" => S(|a| char_chain(a, |o| o == Ordering::Less)),
        "char>?" => S(|a| char_chain(a, |o| o == Ordering::Greater)),
        "char<=?" => S(|a| char_chain(a, |o| o != Ordering::Greater)),
        "char>=?" => S(|a| char_chain(a, |o| o != Ordering::Less)),
        "char-alphabetic?" => S(|a| Ok(Value::Bool(char_arg(&a[0])?.is_alphabetic()))),
        "char-numeric?" => S(|a| Ok(Value::Bool(char_arg(&a[0])?.is_numeric()))),
        "char-whitespace?" => S(|a| Ok(Value::Bool(char_arg(&a[0])?.is_whitespace()))),
        "char-upper-case?" => S(|a| Ok(Value::Bool(char_arg(&a[0])?.is_uppercase()))),
        "char-lower-case?" => S(|a| Ok(Value::Bool(char_arg(&a[0])?.is_lowercase()))),
        "char->integer" => S(|a| Ok(Value::Int(char_arg(&a[0])? as i64))),
        "integer->char" => S(|a| {
            let n = exact(&a[0])?;
            n.to_u32()
                .and_then(char::from_u32)
                .map(Value::Char)
                .ok_or_else(|| format!("integer->char: {n} is not a character"))
        }),
        "char-upcase" => S(|a| {
            let c = char_arg(&a[0])?;
            Ok(Value::Char(c.to_uppercase().next().unwrap_or(c)))
        }),
        "char-downcase" => S(|a| {
            let c = char_arg(&a[0])?;
            Ok(Value::Char(c.to_lowercase().next().unwrap_or(c)))
        }),
        "string?" => S(|a| Ok(Value::Bool(matches!(a[0], Value::Str(_))))),
        "make-string" => S(|a| {
            let k = index_arg(&a[0])?;
            if k > MAX_STRING_LEN {
                return Err("make-string: length too large".into());
            }
            let fill = match a.get(1) {
                Some(c) => char_arg(c)?,
                None => ' ',
            };
            Ok(Value::string(&std::iter::repeat_n(fill, k).collect::<String>()))
        }),
        "string" => S(|a| Ok(Value::string(&a.iter().map(char_arg).collect::<Result<String, _>>()?))),
        "string-length" => S(|a| Ok(Value::Int(string_arg(&a[0])?.chars().count() as i64))),
        "string-ref" => S(|a| {
            let s = string_arg(&a[0])?;
            let k = index_arg(&a[1])?;
            s.chars().nth(k).map(Value::Char).ok_or_else(|| "string-ref: index out of range".into())
        }),
        "string=?" => S(|a| string_chain(a, |o| o == Ordering::Equal)),
        "string<?" => S(|a| string_chain(a, |o| o == Ordering::Less)),
        "string>?" => S(|a| string_chain(a, |o| o == Ordering::Greater)),
        "string<=?" => S(|a| string_chain(a, |o| o != Ordering::Greater)),
        "string>=?" => S(|a| string_chain(a, |o| o != Ordering::Less)),
        "substring" => S(|a| {
            let s: Vec<char> = string_arg(&a[0])?.chars().collect();
            let (start, end) = (index_arg(&a[1])?, index_arg(&a[2])?);
            if start > end || end > s.len() {
                return Err("substring: index out of range".into());
            }
            Ok(Value::string(&s[start..end].iter().collect::<String>()))
        }),
        "string-append" => S(|a| {
            let mut out = String::new();
            for v in a {
                out.push_str(&string_arg(v)?);
            }
            Ok(Value::string(&out))
        }),
        "string->list" => S(|a| Ok(Value::list(string_arg(&a[0])?.chars().map(Value::Char).collect::<Vec<_>>()))),
        "list->string" => {
            S(|a| Ok(Value::string(&proper_list(&a[0])?.iter().map(char_arg).collect::<Result<String, _>>()?)))
        }
        "string-copy" => S(|a| Ok(Value::string(&string_arg(&a[0])?))),
        "procedure?" => S(|a| Ok(Value::Bool(a[0].is_procedure()))),
        "apply" => X(Special::Apply),
        "map" => X(Special::Map),
        "for-each" => X(Special::ForEach),
        "force" => X(Special::Force),
        "call-with-current-continuation" => X(Special::CallCc),
        "values" => X(Special::Values),
        "call-with-values" => X(Special::CallWithValues),
        _ => return None,
    })
}

pub fn type_error(expected: &str, got: &Value) -> String {
    format!("expected {expected}, got {} `{got}`", got.type_name())
}

fn num(v: &Value) -> Result<(), String> {
    if v.is_number() {
        Ok(())
    } else {
        Err(type_error("number", v))
    }
}

pub fn to_f64(v: &Value) -> Result<f64, String> {
    match v {
        Value::Int(n) => Ok(*n as f64),
        Value::Big(n) => Ok(n.to_f64().unwrap_or(f64::NAN)),
        Value::Real(x) => Ok(*x),
        v => Err(type_error("number", v)),
    }
}

fn exact(v: &Value) -> Result<BigInt, String> {
    match v {
        Value::Int(n) => Ok(BigInt::from(*n)),
        Value::Big(n) => Ok((**n).clone()),
        v => Err(type_error("exact integer", v)),
    }
}

/// Exact integers, or inexact reals with integral value.
fn integer_arg(v: &Value) -> Result<BigInt, String> {
    match v {
        Value::Real(x) if x.is_finite() && x.fract() == 0.0 => Ok(BigInt::from_f64(*x).expect("integral")),
        Value::Real(_) => Err(type_error("integer", v)),
        v => exact(v),
    }
}

fn index_arg(v: &Value) -> Result<usize, String> {
    match v {
        Value::Int(n) if *n >= 0 => Ok(*n as usize),
        v => Err(type_error("non-negative index", v)),
    }
}

fn radix(v: &Value) -> Result<u32, String> {
    match v {
        Value::Int(r @ (2 | 8 | 10 | 16)) => Ok(*r as u32),
        v => Err(format!("bad radix `{v}`")),
    }
}

fn checked(n: BigInt) -> Result<Value, String> {
    if n.bits() > MAX_INTEGER_BITS {
        return Err("integer too large".into());
    }
    Ok(Value::integer(n))
}

fn is_exact_pair(a: &Value, b: &Value) -> Result<bool, String> {
    num(a)?;
    num(b)?;
    Ok(!matches!(a, Value::Real(_)) && !matches!(b, Value::Real(_)))
}

pub fn add(a: &Value, b: &Value) -> Result<Value, String> {
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        if let Some(s) = x.checked_add(*y) {
            return Ok(Value::Int(s));
        }
    }
    if is_exact_pair(a, b)? {
        checked(exact(a)? + exact(b)?)
    } else {
        Ok(Value::Real(to_f64(a)? + to_f64(b)?))
    }
}

pub fn sub(a: &Value, b: &Value) -> Result<Value, String> {
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        if let Some(s) = x.checked_sub(*y) {
            return Ok(Value::Int(s));
        }
    }
    if is_exact_pair(a, b)? {
        checked(exact(a)? - exact(b)?)
    } else {
        Ok(Value::Real(to_f64(a)? - to_f64(b)?))
    }
}

pub fn mul(a: &Value, b: &Value) -> Result<Value, String> {
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        if let Some(s) = x.checked_mul(*y) {
            return Ok(Value::Int(s));
        }
    }
    if is_exact_pair(a, b)? {
        checked(exact(a)? * exact(b)?)
    } else {
        Ok(Value::Real(to_f64(a)? * to_f64(b)?))
    }
}

/// Exact division stays exact when the quotient is integral; otherwise the
/// result is inexact (there are no rationals).
pub fn div(a: &Value, b: &Value) -> Result<Value, String> {
    if is_exact_pair(a, b)? {
        let (x, y) = (exact(a)?, exact(b)?);
        if y.is_zero() {
            return Err("division by zero".into());
        }
        let (q, r) = x.div_rem(&y);
        if r.is_zero() {
            return checked(q);
        }
        return Ok(Value::Real(to_f64(a)? / to_f64(b)?));
    }
    let y = to_f64(b)?;
    if y == 0.0 {
        return Err("division by zero".into());
    }
    Ok(Value::Real(to_f64(a)? / y))
}

fn int_division(a: &[Value], op: fn(&BigInt, &BigInt) -> BigInt) -> Result<Value, String> {
    let inexact = matches!(a[0], Value::Real(_)) || matches!(a[1], Value::Real(_));
    let (x, y) = (integer_arg(&a[0])?, integer_arg(&a[1])?);
    if y.is_zero() {
        return Err("division by zero".into());
    }
    let r = op(&x, &y);
    if inexact {
        Ok(Value::Real(r.to_f64().unwrap_or(f64::NAN)))
    } else {
        checked(r)
    }
}

/// `None` when either side is NaN.
pub fn num_cmp(a: &Value, b: &Value) -> Result<Option<Ordering>, String> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(Some(x.cmp(y))),
        _ if is_exact_pair(a, b)? => Ok(Some(exact(a)?.cmp(&exact(b)?))),
        _ => Ok(to_f64(a)?.partial_cmp(&to_f64(b)?)),
    }
}

fn compare_chain(a: &[Value], ok: fn(Ordering) -> bool) -> Result<Value, String> {
    for v in a {
        num(v)?;
    }
    let mut result = true;
    for w in a.windows(2) {
        if !num_cmp(&w[0], &w[1])?.is_some_and(ok) {
            result = false;
        }
    }
    Ok(Value::Bool(result))
}

fn sign(v: &Value) -> Result<Option<Ordering>, String> {
    num_cmp(v, &Value::Int(0))
}

fn extremum(a: &[Value], keep: Ordering) -> Result<Value, String> {
    let mut best = a[0].clone();
    num(&best)?;
    let mut inexact = matches!(best, Value::Real(_));
    for v in &a[1..] {
        num(v)?;
        inexact |= matches!(v, Value::Real(_));
        if num_cmp(v, &best)? == Some(keep) {
            best = v.clone();
        }
    }
    if inexact {
        Ok(Value::Real(to_f64(&best)?))
    } else {
        Ok(best)
    }
}

fn rounding(v: &Value, f: fn(f64) -> f64) -> Result<Value, String> {
    match v {
        Value::Real(x) => Ok(Value::Real(f(*x))),
        v => num(v).map(|_| v.clone()),
    }
}

fn real_fn(v: &Value, f: fn(f64) -> f64) -> Result<Value, String> {
    let x = to_f64(v)?;
    let y = f(x);
    if y.is_nan() && !x.is_nan() {
        return Err("argument out of domain".into());
    }
    Ok(Value::Real(y))
}

fn sqrt(v: &Value) -> Result<Value, String> {
    match v {
        Value::Int(_) | Value::Big(_) => {
            let n = exact(v)?;
            if n.is_negative() {
                return Err("sqrt of a negative number (complex numbers unsupported)".into());
            }
            let r = n.sqrt();
            if &r * &r == n {
                Ok(Value::integer(r))
            } else {
                Ok(Value::Real(to_f64(v)?.sqrt()))
            }
        }
        _ => real_fn(v, f64::sqrt),
    }
}

fn expt(base: &Value, power: &Value) -> Result<Value, String> {
    if is_exact_pair(base, power)? {
        let (b, p) = (exact(base)?, exact(power)?);
        if !p.is_negative() {
            let magnitude = b.magnitude();
            if magnitude <= &num_bigint::BigUint::from(1u8) {
                let odd = p.is_odd();
                return Ok(Value::integer(if b.is_zero() {
                    if p.is_zero() {
                        BigInt::from(1)
                    } else {
                        BigInt::zero()
                    }
                } else if b.is_negative() && odd {
                    BigInt::from(-1)
                } else {
                    BigInt::from(1)
                }));
            }
            let p = p.to_u64().filter(|p| p.saturating_mul(b.bits()) <= MAX_INTEGER_BITS);
            let Some(p) = p else {
                return Err("integer too large".into());
            };
            return checked(num_traits::pow::Pow::pow(&b, p));
        }
    }
    let (b, p) = (to_f64(base)?, to_f64(power)?);
    let r = b.powf(p);
    if r.is_nan() && !b.is_nan() && !p.is_nan() {
        return Err("expt: complex result unsupported".into());
    }
    Ok(Value::Real(r))
}

fn cxr(v: &Value, path: &str) -> Result<Value, String> {
    let mut cur = v.clone();
    for step in path.chars() {
        let Value::Pair(p) = &cur else {
            return Err(type_error("pair", &cur));
        };
        let next = if step == 'a' { p.0.clone() } else { p.1.clone() };
        cur = next;
    }
    Ok(cur)
}

fn proper_list(v: &Value) -> Result<Vec<Value>, String> {
    v.list_items().ok_or_else(|| type_error("list", v))
}

fn append(a: &[Value]) -> Result<Value, String> {
    let Some((last, init)) = a.split_last() else {
        return Ok(Value::Nil);
    };
    let mut result = last.clone();
    for v in init.iter().rev() {
        result = proper_list(v)?.into_iter().rev().fold(result, |acc, x| Value::cons(x, acc));
    }
    Ok(result)
}

fn list_tail(list: &Value, k: &Value) -> Result<Value, String> {
    let mut cur = list.clone();
    for _ in 0..index_arg(k)? {
        let next = match &cur {
            Value::Pair(p) => p.1.clone(),
            _ => return Err("index out of range".into()),
        };
        cur = next;
    }
    Ok(cur)
}

fn member(x: &Value, list: &Value, same: fn(&Value, &Value) -> bool) -> Result<Value, String> {
    let mut cur = list.clone();
    loop {
        let next = match &cur {
            Value::Nil => return Ok(Value::Bool(false)),
            Value::Pair(p) if same(x, &p.0) => return Ok(cur.clone()),
            Value::Pair(p) => p.1.clone(),
            v => return Err(type_error("list", v)),
        };
        cur = next;
    }
}

fn assoc(x: &Value, list: &Value, same: fn(&Value, &Value) -> bool) -> Result<Value, String> {
    for entry in proper_list(list)? {
        match &entry {
            Value::Pair(p) if same(x, &p.0) => return Ok(entry.clone()),
            Value::Pair(_) => {}
            v => return Err(type_error("association list entry", v)),
        }
    }
    Ok(Value::Bool(false))
}

fn char_arg(v: &Value) -> Result<char, String> {
    match v {
        Value::Char(c) => Ok(*c),
        v => Err(type_error("character", v)),
    }
}

fn string_arg(v: &Value) -> Result<Rc<str>, String> {
    match v {
        Value::Str(s) => Ok(s.clone()),
        v => Err(type_error("string", v)),
    }
}

fn char_chain(a: &[Value], ok: fn(Ordering) -> bool) -> Result<Value, String> {
    let cs = a.iter().map(char_arg).collect::<Result<Vec<_>, _>>()?;
    Ok(Value::Bool(cs.windows(2).all(|w| ok(w[0].cmp(&w[1])))))
}

fn string_chain(a: &[Value], ok: fn(Ordering) -> bool) -> Result<Value, String> {
    let ss = a.iter().map(string_arg).collect::<Result<Vec<_>, _>>()?;
    Ok(Value::Bool(ss.windows(2).all(|w| ok(w[0].cmp(&w[1])))))
}

/// Numeric equality used when comparing program outputs to expected values:
/// exact when both sides are exact, relative tolerance otherwise.
pub fn numbers_close(a: &Value, b: &Value, rel_tol: f64) -> bool {
    match (a, b) {
        (Value::Real(_), _) | (_, Value::Real(_)) => {
            let (Ok(x), Ok(y)) = (to_f64(a), to_f64(b)) else {
                return false;
            };
            if x == y {
                return true;
            }
            (x - y).abs() <= rel_tol * x.abs().max(y.abs())
        }
        _ => matches!(num_cmp(a, b), Ok(Some(Ordering::Equal))),
    }
}

/// Compares a program result against an expected datum, structurally, using
/// [`numbers_close`] at numeric leaves.
pub fn matches_expected(got: &Value, want: &Datum, rel_tol: f64) -> bool {
    match (got, want) {
        (g, Datum::Int(_) | Datum::Big(_) | Datum::Real(_)) => {
            g.is_number() && numbers_close(g, &Value::from_datum(want), rel_tol)
        }
        (Value::Bool(a), Datum::Bool(b)) => a == b,
        (Value::Char(a), Datum::Char(b)) => a == b,
        (Value::Str(a), Datum::Str(b)) => &**a == b.as_str(),
        (Value::Sym(a), Datum::Sym(b)) => a == b,
        (Value::Nil, Datum::List(items)) => items.is_empty(),
        (Value::Pair(_), Datum::List(_) | Datum::Dotted(..)) => {
            let (items, tail): (&[Datum], Option<&Datum>) = match want {
                Datum::List(items) => (items, None),
                Datum::Dotted(items, tail) => (items, Some(tail)),
                _ => unreachable!(),
            };
            let mut cur = got.clone();
            for item in items {
                let next = match &cur {
                    Value::Pair(p) if matches_expected(&p.0, item, rel_tol) => p.1.clone(),
                    _ => return false,
                };
                cur = next;
            }
            match tail {
                None => matches!(cur, Value::Nil),
                Some(t) => matches_expected(&cur, t, rel_tol),
            }
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_manifest_entry_is_implemented() {
        let entries = manifest_entries();
        assert_eq!(TABLE.entries.len(), entries.len());
        for (name, _) in entries {
            assert!(TABLE.lookup(Atom::new(&name)).is_some(), "{name}");
        }
    }

    #[test]
    fn no_io_procedures() {
        for name in ["read", "write", "display", "newline", "open-input-file", "load"] {
            assert!(TABLE.lookup(Atom::new(name)).is_none(), "{name}");
        }
    }

    #[test]
    fn arithmetic_promotes_to_bignum() {
        let big = mul(&Value::Int(i64::MAX), &Value::Int(4)).unwrap();
        assert!(matches!(big, Value::Big(_)));
        let back = div(&big, &Value::Int(4)).unwrap();
        assert!(matches!(back, Value::Int(i64::MAX)));
    }

    #[test]
    fn division_exactness() {
        assert!(matches!(div(&Value::Int(4), &Value::Int(2)).unwrap(), Value::Int(2)));
        assert!(matches!(div(&Value::Int(1), &Value::Int(4)).unwrap(), Value::Real(x) if x == 0.25));
        assert!(div(&Value::Int(1), &Value::Int(0)).is_err());
    }

    #[test]
    fn sqrt_exact_when_perfect_square() {
        assert!(matches!(sqrt(&Value::Int(9)).unwrap(), Value::Int(3)));
        assert!(matches!(sqrt(&Value::Int(2)).unwrap(), Value::Real(_)));
        assert!(sqrt(&Value::Int(-4)).is_err());
    }

    #[test]
    fn expt_bounds() {
        assert!(matches!(expt(&Value::Int(2), &Value::Int(10)).unwrap(), Value::Int(1024)));
        assert!(expt(&Value::Int(2), &Value::Int(1 << 20)).is_err());
        assert!(matches!(expt(&Value::Int(-1), &Value::Int(1 << 40)).unwrap(), Value::Int(1)));
        assert!(matches!(expt(&Value::Int(2), &Value::Int(-1)).unwrap(), Value::Real(x) if x == 0.5));
    }

    #[test]
    fn expected_value_matching() {
        assert!(matches_expected(&Value::Real(4.0000000001), &Datum::Int(4), 1e-6));
        assert!(!matches_expected(&Value::Real(4.1), &Datum::Int(4), 1e-6));
        assert!(matches_expected(&Value::Int(4), &Datum::Int(4), 0.0));
        assert!(!matches_expected(&Value::Bool(true), &Datum::Int(1), 1e-6));
        let list = Value::list(vec![Value::Int(1), Value::Int(2)]);
        assert!(matches_expected(&list, &Datum::List(vec![Datum::Int(1), Datum::Int(2)]), 0.0));
    }
}
