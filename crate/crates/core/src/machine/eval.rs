//! Explicit-stack evaluator with cycle accounting.
//!
//! Each expression-node visit and each procedure application costs one cycle.
//! Continuation frames live on a heap stack, so tail calls never grow it and
//! deep non-tail recursion hits `max_depth` instead of the host stack.

use std::cell::RefCell;
use std::rc::Rc;

use super::builtins::{Kind, Special, TABLE};
use super::compile::{compile, Expr, Lambda, Program, E};
use super::syntax::{Datum, ProgramAst};
use super::value::{Closure, Promise, Value};
use crate::intern::Atom;

pub const DEFAULT_MAX_DEPTH: usize = 10_000;
pub const DEFAULT_MAX_FRAMES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecBudget {
    pub max_cycles: u64,
}

impl ExecBudget {
    pub fn new(max_cycles: u64) -> Self {
        ExecBudget { max_cycles }
    }
}

#[derive(Debug, Clone)]
pub enum ExecStatus {
    Value(Value),
    SchemeError(String),
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct ExecOutcome {
    pub status: ExecStatus,
    pub cycles_used: u64,
}

impl ExecOutcome {
    pub fn value(&self) -> Option<&Value> {
        match &self.status {
            ExecStatus::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self.status, ExecStatus::SchemeError(_))
    }

    pub fn is_time_limit(&self) -> bool {
        matches!(self.status, ExecStatus::TimeLimit)
    }
}

/// A pending continuation frame.
#[derive(Clone)]
pub enum Kont {
    If { then: E, otherwise: Option<E>, env: u32 },
    Seq { body: Rc<[E]>, next: usize, env: u32 },
    Define { name: Atom, env: u32 },
    Set { name: Atom, env: u32 },
    App { args: Rc<[E]>, vals: Vec<Value>, env: u32 },
    And { rest: Rc<[E]>, next: usize, env: u32 },
    Or { rest: Rc<[E]>, next: usize, env: u32 },
    Map { f: Value, lists: Vec<Value>, acc: Vec<Value>, collect: bool },
    Force { promise: Rc<RefCell<Promise>> },
    CallWithValues { consumer: Value },
}

struct Frame {
    parent: u32,
    vars: Vec<(Atom, Value)>,
}

const GLOBAL: u32 = 0;
const NO_PARENT: u32 = u32::MAX;

enum Halt {
    Error(String),
    TimeLimit,
}

impl From<String> for Halt {
    fn from(msg: String) -> Self {
        Halt::Error(msg)
    }
}

enum Control {
    Eval(E, u32),
    Return(Value),
    Apply(Value, Vec<Value>),
}

/// Reusable interpreter state. Each [`Evaluator::run`] starts from a fresh
/// global environment, so evaluations never observe one another.
pub struct Evaluator {
    pub max_depth: usize,
    pub max_frames: usize,
    frames: Vec<Frame>,
    stack: Vec<Kont>,
    used: u64,
    limit: u64,
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator::new()
    }
}

impl Evaluator {
    pub fn new() -> Self {
        Evaluator {
            max_depth: DEFAULT_MAX_DEPTH,
            max_frames: DEFAULT_MAX_FRAMES,
            frames: Vec::new(),
            stack: Vec::new(),
            used: 0,
            limit: 0,
        }
    }

    /// Parses nothing and compiles once; the returned outcome reports 0 cycles
    /// on a compile error.
    pub fn evaluate(&mut self, ast: &ProgramAst, budget: ExecBudget, bindings: &[(Atom, Datum)]) -> ExecOutcome {
        match compile(ast) {
            Ok(program) => self.run(&program, budget, bindings),
            Err(e) => ExecOutcome { status: ExecStatus::SchemeError(e.to_string()), cycles_used: 0 },
        }
    }

    pub fn run(&mut self, program: &Program, budget: ExecBudget, bindings: &[(Atom, Datum)]) -> ExecOutcome {
        self.frames.clear();
        self.stack.clear();
        self.frames.push(Frame {
            parent: NO_PARENT,
            vars: bindings.iter().map(|(a, d)| (*a, Value::from_datum(d))).collect(),
        });
        self.used = 0;
        self.limit = budget.max_cycles;
        let status = match self.execute(program) {
            Ok(v) => ExecStatus::Value(v),
            Err(Halt::Error(msg)) => ExecStatus::SchemeError(msg),
            Err(Halt::TimeLimit) => ExecStatus::TimeLimit,
        };
        let outcome = ExecOutcome { status, cycles_used: self.used };
        // Drop closures and continuations now rather than on the next run.
        self.frames.clear();
        self.stack.clear();
        outcome
    }

    fn execute(&mut self, program: &Program) -> Result<Value, Halt> {
        let mut ctl = match program.body.len() {
            0 => return Ok(Value::Unspecified),
            1 => Control::Eval(program.body[0].clone(), GLOBAL),
            _ => {
                self.push(Kont::Seq { body: program.body.clone(), next: 1, env: GLOBAL })?;
                Control::Eval(program.body[0].clone(), GLOBAL)
            }
        };
        loop {
            ctl = match ctl {
                Control::Eval(e, env) => {
                    self.tick()?;
                    self.eval(&e, env)?
                }
                Control::Apply(f, args) => {
                    self.tick()?;
                    self.apply(f, args)?
                }
                Control::Return(v) => match self.stack.pop() {
                    None => return Ok(v),
                    Some(k) => self.resume(k, v)?,
                },
            };
        }
    }

    fn tick(&mut self) -> Result<(), Halt> {
        if self.used >= self.limit {
            return Err(Halt::TimeLimit);
        }
        self.used += 1;
        Ok(())
    }

    fn push(&mut self, k: Kont) -> Result<(), Halt> {
        if self.stack.len() >= self.max_depth {
            return Err(Halt::Error("maximum evaluation depth exceeded".into()));
        }
        self.stack.push(k);
        Ok(())
    }

    fn new_frame(&mut self, parent: u32, vars: Vec<(Atom, Value)>) -> Result<u32, Halt> {
        if self.frames.len() >= self.max_frames {
            return Err(Halt::Error("environment memory exhausted".into()));
        }
        self.frames.push(Frame { parent, vars });
        Ok((self.frames.len() - 1) as u32)
    }

    fn lookup(&self, name: Atom, mut env: u32) -> Result<Value, Halt> {
        while env != NO_PARENT {
            let frame = &self.frames[env as usize];
            if let Some((_, v)) = frame.vars.iter().rev().find(|(a, _)| *a == name) {
                return Ok(v.clone());
            }
            env = frame.parent;
        }
        match TABLE.lookup(name) {
            Some(id) => Ok(Value::Builtin(id)),
            None => Err(Halt::Error(format!("unbound variable `{name}`"))),
        }
    }

    fn define(&mut self, name: Atom, value: Value, env: u32) {
        let vars = &mut self.frames[env as usize].vars;
        match vars.iter_mut().find(|(a, _)| *a == name) {
            Some(slot) => slot.1 = value,
            None => vars.push((name, value)),
        }
    }

    fn assign(&mut self, name: Atom, value: Value, mut env: u32) -> Result<(), Halt> {
        while env != NO_PARENT {
            let frame = &mut self.frames[env as usize];
            if let Some(slot) = frame.vars.iter_mut().rev().find(|(a, _)| *a == name) {
                slot.1 = value;
                return Ok(());
            }
            env = frame.parent;
        }
        if TABLE.lookup(name).is_some() {
            self.define(name, value, GLOBAL);
            return Ok(());
        }
        Err(Halt::Error(format!("set! of unbound variable `{name}`")))
    }

    fn eval(&mut self, e: &E, env: u32) -> Result<Control, Halt> {
        Ok(match &**e {
            Expr::Const(v) => Control::Return(v.clone()),
            Expr::Var(a) => Control::Return(self.lookup(*a, env)?),
            Expr::If(c, t, o) => {
                self.push(Kont::If { then: t.clone(), otherwise: o.clone(), env })?;
                Control::Eval(c.clone(), env)
            }
            Expr::Lambda(l) => Control::Return(Value::Closure(Rc::new(Closure { lambda: l.clone(), env }))),
            Expr::Define(name, x) => {
                self.push(Kont::Define { name: *name, env })?;
                Control::Eval(x.clone(), env)
            }
            Expr::Set(name, x) => {
                self.push(Kont::Set { name: *name, env })?;
                Control::Eval(x.clone(), env)
            }
            Expr::Begin(body) => self.sequence(body, env)?,
            Expr::App(f, args) => {
                self.push(Kont::App { args: args.clone(), vals: Vec::with_capacity(args.len() + 1), env })?;
                Control::Eval(f.clone(), env)
            }
            Expr::And(xs) => {
                if xs.len() > 1 {
                    self.push(Kont::And { rest: xs.clone(), next: 1, env })?;
                }
                Control::Eval(xs[0].clone(), env)
            }
            Expr::Or(xs) => {
                if xs.len() > 1 {
                    self.push(Kont::Or { rest: xs.clone(), next: 1, env })?;
                }
                Control::Eval(xs[0].clone(), env)
            }
            Expr::Delay(x) => Control::Return(Value::Promise(Rc::new(RefCell::new(Promise::Delayed(x.clone(), env))))),
        })
    }

    fn sequence(&mut self, body: &Rc<[E]>, env: u32) -> Result<Control, Halt> {
        if body.is_empty() {
            return Ok(Control::Return(Value::Unspecified));
        }
        if body.len() > 1 {
            self.push(Kont::Seq { body: body.clone(), next: 1, env })?;
        }
        Ok(Control::Eval(body[0].clone(), env))
    }

    fn resume(&mut self, k: Kont, v: Value) -> Result<Control, Halt> {
        Ok(match k {
            Kont::If { then, otherwise, env } => {
                if v.is_true() {
                    Control::Eval(then, env)
                } else {
                    match otherwise {
                        Some(o) => Control::Eval(o, env),
                        None => Control::Return(Value::Unspecified),
                    }
                }
            }
            Kont::Seq { body, next, env } => {
                let e = body[next].clone();
                if next + 1 < body.len() {
                    self.push(Kont::Seq { body, next: next + 1, env })?;
                }
                Control::Eval(e, env)
            }
            Kont::Define { name, env } => {
                self.define(name, v, env);
                Control::Return(Value::Unspecified)
            }
            Kont::Set { name, env } => {
                self.assign(name, v, env)?;
                Control::Return(Value::Unspecified)
            }
            Kont::App { args, mut vals, env } => {
                vals.push(v);
                let i = vals.len() - 1;
                if i < args.len() {
                    let e = args[i].clone();
                    self.push(Kont::App { args, vals, env })?;
                    Control::Eval(e, env)
                } else {
                    let f = vals.remove(0);
                    Control::Apply(f, vals)
                }
            }
            Kont::And { rest, next, env } => {
                if !v.is_true() {
                    return Ok(Control::Return(v));
                }
                let e = rest[next].clone();
                if next + 1 < rest.len() {
                    self.push(Kont::And { rest, next: next + 1, env })?;
                }
                Control::Eval(e, env)
            }
            Kont::Or { rest, next, env } => {
                if v.is_true() {
                    return Ok(Control::Return(v));
                }
                let e = rest[next].clone();
                if next + 1 < rest.len() {
                    self.push(Kont::Or { rest, next: next + 1, env })?;
                }
                Control::Eval(e, env)
            }
            Kont::Map { f, lists, mut acc, collect } => {
                if collect {
                    acc.push(v);
                }
                self.map_step(f, lists, acc, collect)?
            }
            Kont::Force { promise } => {
                let mut p = promise.borrow_mut();
                let result = match &*p {
                    Promise::Forced(first) => first.clone(),
                    Promise::Delayed(..) => v,
                };
                *p = Promise::Forced(result.clone());
                Control::Return(result)
            }
            Kont::CallWithValues { consumer } => {
                let args = match v {
                    Value::Values(vs) => vs.to_vec(),
                    v => vec![v],
                };
                Control::Apply(consumer, args)
            }
        })
    }

    fn apply(&mut self, f: Value, mut args: Vec<Value>) -> Result<Control, Halt> {
        match f {
            Value::Closure(c) => {
                let lambda: &Lambda = &c.lambda;
                let n = lambda.params.len();
                if args.len() < n || (lambda.rest.is_none() && args.len() > n) {
                    return Err(Halt::Error(format!(
                        "procedure expects {}{} arguments, got {}",
                        if lambda.rest.is_some() { "at least " } else { "" },
                        n,
                        args.len()
                    )));
                }
                let rest = args.split_off(n);
                let mut vars: Vec<(Atom, Value)> = lambda.params.iter().copied().zip(args).collect();
                if let Some(r) = lambda.rest {
                    vars.push((r, Value::list(rest)));
                }
                let env = self.new_frame(c.env, vars)?;
                self.sequence(&lambda.body, env)
            }
            Value::Builtin(id) => {
                let b = TABLE.get(id);
                if !b.arity.accepts(args.len()) {
                    return Err(Halt::Error(format!(
                        "`{}` expects {:?} arguments, got {}",
                        b.name,
                        b.arity,
                        args.len()
                    )));
                }
                match b.kind {
                    Kind::Simple(op) => Ok(Control::Return(op(&args).map_err(|e| format!("{}: {e}", b.name))?)),
                    Kind::Special(s) => self.special(s, args),
                }
            }
            Value::Continuation(k) => {
                self.stack = (*k).clone();
                Ok(Control::Return(match args.len() {
                    1 => args.pop().expect("one argument"),
                    _ => Value::Values(args.into()),
                }))
            }
            other => Err(Halt::Error(format!("attempt to apply non-procedure `{other}`"))),
        }
    }

    fn special(&mut self, s: Special, mut args: Vec<Value>) -> Result<Control, Halt> {
        Ok(match s {
            Special::Apply => {
                let last = args.pop().expect("arity checked");
                let f = args.remove(0);
                let tail = last.list_items().ok_or_else(|| format!("apply: expected list, got `{last}`"))?;
                args.extend(tail);
                Control::Apply(f, args)
            }
            Special::Map | Special::ForEach => {
                let f = args.remove(0);
                self.map_step(f, args, Vec::new(), s == Special::Map)?
            }
            Special::Force => match args.pop().expect("arity checked") {
                Value::Promise(p) => {
                    let delayed = match &*p.borrow() {
                        Promise::Forced(v) => return Ok(Control::Return(v.clone())),
                        Promise::Delayed(e, env) => (e.clone(), *env),
                    };
                    self.push(Kont::Force { promise: p })?;
                    Control::Eval(delayed.0, delayed.1)
                }
                v => Control::Return(v),
            },
            Special::CallCc => {
                let k = Value::Continuation(Rc::new(self.stack.clone()));
                Control::Apply(args.pop().expect("arity checked"), vec![k])
            }
            Special::Values => Control::Return(match args.len() {
                1 => args.pop().expect("one argument"),
                _ => Value::Values(args.into()),
            }),
            Special::CallWithValues => {
                let consumer = args.pop().expect("arity checked");
                let producer = args.pop().expect("arity checked");
                self.push(Kont::CallWithValues { consumer })?;
                Control::Apply(producer, Vec::new())
            }
        })
    }

    /// One element-wise step of `map` / `for-each` over `lists`.
    fn map_step(&mut self, f: Value, lists: Vec<Value>, acc: Vec<Value>, collect: bool) -> Result<Control, Halt> {
        let mut cars = Vec::with_capacity(lists.len());
        let mut cdrs = Vec::with_capacity(lists.len());
        for l in &lists {
            match l {
                Value::Pair(p) => {
                    cars.push(p.0.clone());
                    cdrs.push(p.1.clone());
                }
                Value::Nil => {
                    return Ok(Control::Return(if collect { Value::list(acc) } else { Value::Unspecified }));
                }
                other => return Err(Halt::Error(format!("map: expected list, got `{other}`"))),
            }
        }
        self.push(Kont::Map { f: f.clone(), lists: cdrs, acc, collect })?;
        Ok(Control::Apply(f, cars))
    }
}

/// One-shot evaluation with a fresh evaluator.
pub fn evaluate(ast: &ProgramAst, budget: ExecBudget, bindings: &[(Atom, Datum)]) -> ExecOutcome {
    Evaluator::new().evaluate(ast, budget, bindings)
}
