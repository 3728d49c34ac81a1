//! Lowers S-expressions into the evaluator's expression tree. Derived forms
//! (`let`, `let*`, `letrec`, named `let`, `cond`, `case`, `do`) are rewritten
//! into the core forms here.

use std::rc::Rc;

use once_cell::sync::Lazy;

use super::syntax::{Datum, ProgramAst};
use super::value::Value;
use crate::intern::Atom;

pub type E = Rc<Expr>;

pub enum Expr {
    Const(Value),
    Var(Atom),
    If(E, E, Option<E>),
    Lambda(Rc<Lambda>),
    Define(Atom, E),
    Set(Atom, E),
    Begin(Rc<[E]>),
    App(E, Rc<[E]>),
    And(Rc<[E]>),
    Or(Rc<[E]>),
    Delay(E),
}

pub struct Lambda {
    pub params: Vec<Atom>,
    pub rest: Option<Atom>,
    pub body: Rc<[E]>,
}

/// A compiled program: top-level forms evaluated in order in the global frame.
pub struct Program {
    pub body: Rc<[E]>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad syntax: {0}")]
pub struct CompileError(pub String);

struct Keywords {
    quote: Atom,
    lambda: Atom,
    define: Atom,
    set: Atom,
    if_: Atom,
    begin: Atom,
    let_: Atom,
    let_star: Atom,
    letrec: Atom,
    letrec_star: Atom,
    cond: Atom,
    case: Atom,
    and: Atom,
    or: Atom,
    do_: Atom,
    delay: Atom,
    else_: Atom,
    arrow: Atom,
    memv: Atom,
    tmp: Atom,
    loop_: Atom,
}

static KW: Lazy<Keywords> = Lazy::new(|| Keywords {
    quote: Atom::new("quote"),
    lambda: Atom::new("lambda"),
    define: Atom::new("define"),
    set: Atom::new("set!"),
    if_: Atom::new("if"),
    begin: Atom::new("begin"),
    let_: Atom::new("let"),
    let_star: Atom::new("let*"),
    letrec: Atom::new("letrec"),
    letrec_star: Atom::new("letrec*"),
    cond: Atom::new("cond"),
    case: Atom::new("case"),
    and: Atom::new("and"),
    or: Atom::new("or"),
    do_: Atom::new("do"),
    delay: Atom::new("delay"),
    else_: Atom::new("else"),
    arrow: Atom::new("=>"),
    memv: Atom::new("memv"),
    // Names containing a space cannot be written in source, so they never capture.
    tmp: Atom::new(" tmp"),
    loop_: Atom::new(" loop"),
});

fn err<T>(msg: impl Into<String>) -> Result<T, CompileError> {
    Err(CompileError(msg.into()))
}

pub fn compile(ast: &ProgramAst) -> Result<Program, CompileError> {
    let body = ast.forms.iter().map(expr).collect::<Result<Vec<_>, _>>()?;
    Ok(Program { body: body.into() })
}

fn list(d: &Datum) -> Option<&[Datum]> {
    match d {
        Datum::List(items) => Some(items),
        _ => None,
    }
}

fn body(forms: &[Datum]) -> Result<Rc<[E]>, CompileError> {
    if forms.is_empty() {
        return err("empty body");
    }
    Ok(forms.iter().map(expr).collect::<Result<Vec<_>, _>>()?.into())
}

fn seq(exprs: Rc<[E]>) -> E {
    if exprs.len() == 1 {
        exprs[0].clone()
    } else {
        Rc::new(Expr::Begin(exprs))
    }
}

fn formals(d: &Datum) -> Result<(Vec<Atom>, Option<Atom>), CompileError> {
    let as_sym = |d: &Datum| d.as_sym().ok_or_else(|| CompileError(format!("bad parameter {d}")));
    match d {
        Datum::Sym(a) => Ok((Vec::new(), Some(*a))),
        Datum::List(items) => Ok((items.iter().map(as_sym).collect::<Result<_, _>>()?, None)),
        Datum::Dotted(items, tail) => Ok((items.iter().map(as_sym).collect::<Result<_, _>>()?, Some(as_sym(tail)?))),
        _ => err(format!("bad parameter list {d}")),
    }
}

fn lambda(params: &Datum, forms: &[Datum]) -> Result<E, CompileError> {
    let (params, rest) = formals(params)?;
    Ok(Rc::new(Expr::Lambda(Rc::new(Lambda { params, rest, body: body(forms)? }))))
}

/// `((lambda (v ...) body ...) init ...)`
fn let_of(bindings: &[(Atom, E)], body_exprs: Rc<[E]>) -> E {
    let lam = Lambda { params: bindings.iter().map(|b| b.0).collect(), rest: None, body: body_exprs };
    let args: Vec<E> = bindings.iter().map(|b| b.1.clone()).collect();
    Rc::new(Expr::App(Rc::new(Expr::Lambda(Rc::new(lam))), args.into()))
}

fn bindings(d: &Datum) -> Result<Vec<(Atom, E)>, CompileError> {
    let items = list(d).ok_or_else(|| CompileError(format!("bad bindings {d}")))?;
    items
        .iter()
        .map(|b| match list(b) {
            Some([Datum::Sym(name), init]) => Ok((*name, expr(init)?)),
            _ => err(format!("bad binding {b}")),
        })
        .collect()
}

fn expr(d: &Datum) -> Result<E, CompileError> {
    match d {
        Datum::Sym(a) => Ok(Rc::new(Expr::Var(*a))),
        Datum::List(items) if items.is_empty() => err("empty combination"),
        Datum::List(items) => combination(items),
        Datum::Dotted(..) => err(format!("improper combination {d}")),
        atom => Ok(Rc::new(Expr::Const(Value::from_datum(atom)))),
    }
}

fn combination(items: &[Datum]) -> Result<E, CompileError> {
    let kw = &*KW;
    if let Datum::Sym(head) = &items[0] {
        let head = *head;
        let args = &items[1..];
        if head == kw.quote {
            return match args {
                [d] => Ok(Rc::new(Expr::Const(Value::from_datum(d)))),
                _ => err("quote takes one datum"),
            };
        }
        if head == kw.lambda {
            return match args {
                [params, forms @ ..] => lambda(params, forms),
                _ => err("lambda needs parameters and a body"),
            };
        }
        if head == kw.define {
            return match args {
                [Datum::Sym(name), value] => Ok(Rc::new(Expr::Define(*name, expr(value)?))),
                [Datum::List(sig), forms @ ..] if !sig.is_empty() => {
                    let name = sig[0].as_sym().ok_or_else(|| CompileError("bad define".into()))?;
                    let params = Datum::List(sig[1..].to_vec());
                    Ok(Rc::new(Expr::Define(name, lambda(&params, forms)?)))
                }
                [Datum::Dotted(sig, rest), forms @ ..] => {
                    let name = sig[0].as_sym().ok_or_else(|| CompileError("bad define".into()))?;
                    let params =
                        if sig.len() == 1 { (**rest).clone() } else { Datum::Dotted(sig[1..].to_vec(), rest.clone()) };
                    Ok(Rc::new(Expr::Define(name, lambda(&params, forms)?)))
                }
                _ => err("bad define"),
            };
        }
        if head == kw.set {
            return match args {
                [Datum::Sym(name), value] => Ok(Rc::new(Expr::Set(*name, expr(value)?))),
                _ => err("bad set!"),
            };
        }
        if head == kw.if_ {
            return match args {
                [c, t] => Ok(Rc::new(Expr::If(expr(c)?, expr(t)?, None))),
                [c, t, e] => Ok(Rc::new(Expr::If(expr(c)?, expr(t)?, Some(expr(e)?)))),
                _ => err("bad if"),
            };
        }
        if head == kw.begin {
            if args.is_empty() {
                return Ok(Rc::new(Expr::Const(Value::Unspecified)));
            }
            return Ok(Rc::new(Expr::Begin(body(args)?)));
        }
        if head == kw.let_ {
            return match args {
                [Datum::Sym(name), binds, forms @ ..] => named_let(*name, binds, forms),
                [binds, forms @ ..] => Ok(let_of(&bindings(binds)?, body(forms)?)),
                _ => err("bad let"),
            };
        }
        if head == kw.let_star {
            return match args {
                [binds, forms @ ..] => {
                    let bs = bindings(binds)?;
                    let mut inner = body(forms)?;
                    if bs.is_empty() {
                        return Ok(let_of(&[], inner));
                    }
                    for b in bs.iter().rev() {
                        inner = Rc::from(vec![let_of(std::slice::from_ref(b), inner)]);
                    }
                    Ok(inner[0].clone())
                }
                _ => err("bad let*"),
            };
        }
        if head == kw.letrec || head == kw.letrec_star {
            return match args {
                [binds, forms @ ..] => {
                    let mut exprs: Vec<E> =
                        bindings(binds)?.into_iter().map(|(n, e)| Rc::new(Expr::Define(n, e))).collect();
                    exprs.extend(body(forms)?.iter().cloned());
                    Ok(let_of(&[], exprs.into()))
                }
                _ => err("bad letrec"),
            };
        }
        if head == kw.cond {
            return cond(args);
        }
        if head == kw.case {
            return case(args);
        }
        if head == kw.and {
            return Ok(match args {
                [] => Rc::new(Expr::Const(Value::Bool(true))),
                _ => Rc::new(Expr::And(body(args)?)),
            });
        }
        if head == kw.or {
            return Ok(match args {
                [] => Rc::new(Expr::Const(Value::Bool(false))),
                _ => Rc::new(Expr::Or(body(args)?)),
            });
        }
        if head == kw.do_ {
            return do_loop(args);
        }
        if head == kw.delay {
            return match args {
                [d] => Ok(Rc::new(Expr::Delay(expr(d)?))),
                _ => err("bad delay"),
            };
        }
    }
    let f = expr(&items[0])?;
    let args = items[1..].iter().map(expr).collect::<Result<Vec<_>, _>>()?;
    Ok(Rc::new(Expr::App(f, args.into())))
}

/// `(let name ((v init) ...) body)` becomes
/// `((letrec ((name (lambda (v ...) body))) name) init ...)`.
fn named_let(name: Atom, binds: &Datum, forms: &[Datum]) -> Result<E, CompileError> {
    let bs = bindings(binds)?;
    let lam = Lambda { params: bs.iter().map(|b| b.0).collect(), rest: None, body: body(forms)? };
    let define = Rc::new(Expr::Define(name, Rc::new(Expr::Lambda(Rc::new(lam)))));
    let recur = let_of(&[], Rc::from(vec![define, Rc::new(Expr::Var(name))]));
    let args: Vec<E> = bs.into_iter().map(|b| b.1).collect();
    Ok(Rc::new(Expr::App(recur, args.into())))
}

fn cond(clauses: &[Datum]) -> Result<E, CompileError> {
    let kw = &*KW;
    let Some((first, rest)) = clauses.split_first() else {
        return Ok(Rc::new(Expr::Const(Value::Unspecified)));
    };
    let parts = list(first).filter(|p| !p.is_empty()).ok_or_else(|| CompileError("bad cond clause".into()))?;
    if parts[0].as_sym() == Some(kw.else_) {
        if !rest.is_empty() {
            return err("else clause must be last");
        }
        return Ok(seq(body(&parts[1..])?));
    }
    let test = expr(&parts[0])?;
    let otherwise = cond(rest)?;
    match &parts[1..] {
        [] => {
            // (cond (test) ...) yields the test value when true.
            let tmp = Rc::new(Expr::Var(kw.tmp));
            let branch = Rc::new(Expr::If(tmp.clone(), tmp, Some(otherwise)));
            Ok(let_of(&[(kw.tmp, test)], Rc::from(vec![branch])))
        }
        [Datum::Sym(arrow), receiver] if *arrow == kw.arrow => {
            let tmp = Rc::new(Expr::Var(kw.tmp));
            let call = Rc::new(Expr::App(expr(receiver)?, Rc::from(vec![tmp.clone()])));
            let branch = Rc::new(Expr::If(tmp, call, Some(otherwise)));
            Ok(let_of(&[(kw.tmp, test)], Rc::from(vec![branch])))
        }
        forms => Ok(Rc::new(Expr::If(test, seq(body(forms)?), Some(otherwise)))),
    }
}

fn case(args: &[Datum]) -> Result<E, CompileError> {
    let kw = &*KW;
    let Some((key, clauses)) = args.split_first() else {
        return err("case needs a key");
    };
    let key_var = Rc::new(Expr::Var(kw.tmp));
    let mut chain: E = Rc::new(Expr::Const(Value::Unspecified));
    for (i, clause) in clauses.iter().enumerate().rev() {
        let parts = list(clause).filter(|p| p.len() >= 2).ok_or_else(|| CompileError("bad case clause".into()))?;
        let then = seq(body(&parts[1..])?);
        if parts[0].as_sym() == Some(kw.else_) {
            if i + 1 != clauses.len() {
                return err("else clause must be last");
            }
            chain = then;
            continue;
        }
        let data = list(&parts[0]).ok_or_else(|| CompileError("bad case data".into()))?;
        let test = Rc::new(Expr::App(
            Rc::new(Expr::Var(kw.memv)),
            Rc::from(vec![key_var.clone(), Rc::new(Expr::Const(Value::from_datum(&Datum::List(data.to_vec()))))]),
        ));
        chain = Rc::new(Expr::If(test, then, Some(chain)));
    }
    Ok(let_of(&[(kw.tmp, expr(key)?)], Rc::from(vec![chain])))
}

/// `(do ((v init step) ...) (test res ...) cmd ...)` becomes a named-let loop.
fn do_loop(args: &[Datum]) -> Result<E, CompileError> {
    let kw = &*KW;
    let [specs, exit, commands @ ..] = args else {
        return err("bad do");
    };
    let specs = list(specs).ok_or_else(|| CompileError("bad do bindings".into()))?;
    let mut inits = Vec::new();
    let mut steps = Vec::new();
    for spec in specs {
        match list(spec) {
            Some([Datum::Sym(v), init]) => {
                inits.push((*v, expr(init)?));
                steps.push(Rc::new(Expr::Var(*v)));
            }
            Some([Datum::Sym(v), init, step]) => {
                inits.push((*v, expr(init)?));
                steps.push(expr(step)?);
            }
            _ => return err("bad do binding"),
        }
    }
    let exit = list(exit).filter(|e| !e.is_empty()).ok_or_else(|| CompileError("bad do exit".into()))?;
    let result = if exit.len() == 1 { Rc::new(Expr::Const(Value::Unspecified)) } else { seq(body(&exit[1..])?) };
    let mut loop_body: Vec<E> = commands.iter().map(expr).collect::<Result<_, _>>()?;
    loop_body.push(Rc::new(Expr::App(Rc::new(Expr::Var(kw.loop_)), steps.into())));
    let step_branch = seq(loop_body.into());
    let branch = Rc::new(Expr::If(expr(&exit[0])?, result, Some(step_branch)));
    let lam = Lambda { params: inits.iter().map(|b| b.0).collect(), rest: None, body: Rc::from(vec![branch]) };
    let define = Rc::new(Expr::Define(kw.loop_, Rc::new(Expr::Lambda(Rc::new(lam)))));
    let recur = let_of(&[], Rc::from(vec![define, Rc::new(Expr::Var(kw.loop_))]));
    let args: Vec<E> = inits.into_iter().map(|b| b.1).collect();
    Ok(Rc::new(Expr::App(recur, args.into())))
}
