//! Problems given as input/output examples, training sequences, and
//! solution checking.
//!
//! Sequence files hold one stanza per problem:
//!
//! ```text
//! sequence seq1
//! problem sqr kind=operator-induction arity=1 tol=1e-6
//! ex (2) -> 4
//! start "(" "define" "(" "sqr" <fresh> ")" <push> body ")" <pop>
//! ```

use std::collections::HashSet;
use std::fmt;

use crate::intern::Atom;
use crate::machine::{
    compile, matches_expected, parse_datum, Datum, Evaluator, ExecBudget, ExecStatus, Program, ProgramAst,
};

pub const SEQ0: &str = include_str!("../data/sequences/seq0.seq");
pub const SEQ1: &str = include_str!("../data/sequences/seq1.seq");
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Inversion,
    OperatorInduction,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Inversion => "inversion",
            ProblemKind::OperatorInduction => "operator-induction",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub args: Vec<Datum>,
    pub expected: Datum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub id: String,
    pub kind: ProblemKind,
    pub arity: usize,
    pub examples: Vec<Example>,
    pub tolerance: f64,
    /// Optional start form in grammar-body syntax.
    pub start: Option<String>,
}

impl ProblemSpec {
    /// The name a solution defines and later problems call.
    pub fn name(&self) -> Atom {
        Atom::new(&self.id)
    }

    /// `(<name> <arg1> ... <argN>)` applied to one example's arguments.
    pub fn call(&self, args: &[Datum]) -> Datum {
        let mut items = vec![Datum::Sym(self.name())];
        items.extend(args.iter().map(quoted));
        Datum::List(items)
    }
}

fn quoted(d: &Datum) -> Datum {
    match d {
        Datum::Sym(_) | Datum::List(_) | Datum::Dotted(..) => Datum::List(vec![Datum::sym("quote"), d.clone()]),
        other => other.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSequence {
    pub id: String,
    pub problems: Vec<ProblemSpec>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid sequence: {0}")]
    Validation(String),
    #[error("{0} is outside the domain of the inverted function")]
    Domain(f64),
}

fn parse_err(line: usize, msg: impl Into<String>) -> ProblemError {
    ProblemError::Parse { line, msg: msg.into() }
}

pub fn load_sequence(text: &str) -> Result<TrainingSequence, ProblemError> {
    let mut id = None;
    let mut problems: Vec<ProblemSpec> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match word {
            "sequence" => id = Some(rest.to_string()),
            "problem" => problems.push(parse_header(rest, ln)?),
            "ex" => {
                let p = problems.last_mut().ok_or_else(|| parse_err(ln, "example before any problem"))?;
                let (args, value) = rest.split_once("->").ok_or_else(|| parse_err(ln, "expected `(args) -> value`"))?;
                let args = match parse_datum(args.trim()).map_err(|e| parse_err(ln, e.to_string()))? {
                    Datum::List(items) => items,
                    _ => return Err(parse_err(ln, "arguments must be a parenthesised list")),
                };
                let expected = parse_datum(value.trim()).map_err(|e| parse_err(ln, e.to_string()))?;
                p.examples.push(Example { args, expected });
            }
            "start" => {
                let p = problems.last_mut().ok_or_else(|| parse_err(ln, "start before any problem"))?;
                p.start = Some(rest.to_string());
            }
            _ => return Err(parse_err(ln, format!("unexpected `{word}`"))),
        }
    }
    let seq = TrainingSequence { id: id.unwrap_or_else(|| "sequence".into()), problems };
    validate_sequence(&seq)?;
    Ok(seq)
}

fn parse_header(rest: &str, ln: usize) -> Result<ProblemSpec, ProblemError> {
    let mut words = rest.split_whitespace();
    let id = words.next().ok_or_else(|| parse_err(ln, "problem needs an id"))?.to_string();
    let mut p = ProblemSpec {
        id,
        kind: ProblemKind::OperatorInduction,
        arity: 1,
        examples: Vec::new(),
        tolerance: DEFAULT_TOLERANCE,
        start: None,
    };
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| parse_err(ln, format!("expected key=value, got `{w}`")))?;
        match k {
            "kind" => {
                p.kind = match v {
                    "inversion" => ProblemKind::Inversion,
                    "operator-induction" => ProblemKind::OperatorInduction,
                    _ => return Err(parse_err(ln, format!("unknown kind `{v}`"))),
                }
            }
            "arity" => p.arity = v.parse().map_err(|_| parse_err(ln, "bad arity"))?,
            "tol" => p.tolerance = v.parse().map_err(|_| parse_err(ln, "bad tolerance"))?,
            _ => return Err(parse_err(ln, format!("unknown key `{k}`"))),
        }
    }
    Ok(p)
}

pub fn validate_sequence(seq: &TrainingSequence) -> Result<(), ProblemError> {
    let bad = |m: String| Err(ProblemError::Validation(m));
    if seq.problems.is_empty() {
        return bad("no problems".into());
    }
    let mut ids = HashSet::new();
    for p in &seq.problems {
        if !ids.insert(&p.id) {
            return bad(format!("duplicate problem id `{}`", p.id));
        }
        if !matches!(parse_datum(&p.id), Ok(Datum::Sym(_))) {
            return bad(format!("problem id `{}` is not a Scheme identifier", p.id));
        }
        if p.arity == 0 {
            return bad(format!("`{}` has arity 0", p.id));
        }
        if p.examples.is_empty() {
            return bad(format!("`{}` has no examples", p.id));
        }
        if let Some(e) = p.examples.iter().find(|e| e.args.len() != p.arity) {
            return bad(format!("`{}`: example with {} arguments, arity is {}", p.id, e.args.len(), p.arity));
        }
        if p.tolerance.is_nan() || p.tolerance < 0.0 {
            return bad(format!("`{}` has a negative tolerance", p.id));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionTarget {
    Identity,
    Reciprocal,
    Sqrt,
}

fn number(x: f64) -> Datum {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        Datum::Int(x as i64)
    } else {
        Datum::Real(x)
    }
}

/// Examples `(f(x)) -> x` whose solutions compute the inverse of `target`.
pub fn inversion_examples(target: InversionTarget, points: &[f64]) -> Result<Vec<Example>, ProblemError> {
    points
        .iter()
        .map(|&x| {
            let y = match target {
                InversionTarget::Identity => x,
                InversionTarget::Reciprocal if x == 0.0 => return Err(ProblemError::Domain(x)),
                InversionTarget::Reciprocal => 1.0 / x,
                InversionTarget::Sqrt if x < 0.0 => return Err(ProblemError::Domain(x)),
                InversionTarget::Sqrt => x.sqrt(),
            };
            Ok(Example { args: vec![number(y)], expected: number(x) })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Every example matched; carries total cycles over all examples.
    Pass(u64),
    Fail,
    Error,
    TimeLimit,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass(t) => write!(f, "pass ({t} cycles)"),
            Verdict::Fail => f.write_str("fail"),
            Verdict::Error => f.write_str("error"),
            Verdict::TimeLimit => f.write_str("time limit"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    /// Cycles spent on the examples actually run.
    pub cycles: u64,
}

/// Checks candidates against one problem. Holds compiled example calls and
/// must stay on the thread that created it.
pub struct Checker<'p> {
    problem: &'p ProblemSpec,
    calls: Vec<Program>,
}

impl<'p> Checker<'p> {
    pub fn new(problem: &'p ProblemSpec) -> Checker<'p> {
        let calls = problem
            .examples
            .iter()
            .map(|e| compile(&ProgramAst { forms: vec![problem.call(&e.args)] }).expect("example calls compile"))
            .collect();
        Checker { problem, calls }
    }

    /// Runs the program followed by each example call, each under `budget`,
    /// stopping at the first example that does not match.
    pub fn check(&self, ev: &mut Evaluator, program: &ProgramAst, budget: ExecBudget) -> CheckOutcome {
        let Ok(def) = compile(program) else {
            return CheckOutcome { verdict: Verdict::Error, cycles: 0 };
        };
        self.check_compiled(ev, &def, budget)
    }

    pub fn check_compiled(&self, ev: &mut Evaluator, def: &Program, budget: ExecBudget) -> CheckOutcome {
        let mut total = 0;
        for (example, call) in self.problem.examples.iter().zip(&self.calls) {
            let combined = Program { body: def.body.iter().chain(call.body.iter()).cloned().collect() };
            let out = ev.run(&combined, budget, &[]);
            total += out.cycles_used;
            let verdict = match &out.status {
                ExecStatus::Value(v) if matches_expected(v, &example.expected, self.problem.tolerance) => continue,
                ExecStatus::Value(_) => Verdict::Fail,
                ExecStatus::SchemeError(_) => Verdict::Error,
                ExecStatus::TimeLimit => Verdict::TimeLimit,
            };
            return CheckOutcome { verdict, cycles: total };
        }
        CheckOutcome { verdict: Verdict::Pass(total), cycles: total }
    }
}

pub fn check_solution(program: &ProgramAst, problem: &ProblemSpec, budget: ExecBudget) -> CheckOutcome {
    Checker::new(problem).check(&mut Evaluator::new(), program, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::parse;

    fn seq1() -> TrainingSequence {
        load_sequence(SEQ1).unwrap()
    }

    #[test]
    fn shipped_sequences() {
        let s = seq1();
        let ids: Vec<_> = s.problems.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["sqr", "add", "is0", "pow4", "nand", "xor"]);
        let counts: Vec<_> = s.problems.iter().map(|p| p.examples.len()).collect();
        assert_eq!(counts, [3, 3, 3, 2, 4, 4]);
        assert_eq!(load_sequence(SEQ0).unwrap().problems.len(), 3);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(load_sequence(""), Err(ProblemError::Validation(_))));
        let dup = "problem a arity=1\nex (1) -> 1\nproblem a arity=1\nex (1) -> 1";
        assert!(matches!(load_sequence(dup), Err(ProblemError::Validation(_))));
        assert!(matches!(load_sequence("problem a arity=2\nex (1) -> 1"), Err(ProblemError::Validation(_))));
        assert!(matches!(load_sequence("ex (1) -> 1"), Err(ProblemError::Parse { .. })));
    }

    #[test]
    fn sqr_checks() {
        let p = &seq1().problems[0];
        let b = ExecBudget::new(10_000);
        let good = parse("(define (sqr var0) (* var0 var0))").unwrap();
        assert!(matches!(check_solution(&good, p, b).verdict, Verdict::Pass(_)));
        let doubled = parse("(define (sqr var0) (+ var0 var0))").unwrap();
        // 2+2 = 4 passes the first example; 3+3 = 6 fails the second.
        assert_eq!(check_solution(&doubled, p, b).verdict, Verdict::Fail);
        let broken = parse("(define (sqr var0) (car var0))").unwrap();
        assert_eq!(check_solution(&broken, p, b).verdict, Verdict::Error);
        let slow = parse("(define (sqr var0) (let loop () (loop)))").unwrap();
        let out = check_solution(&slow, p, ExecBudget::new(50));
        assert_eq!(out, CheckOutcome { verdict: Verdict::TimeLimit, cycles: 50 });
    }

    #[test]
    fn pass_cycles_are_sufficient_per_example() {
        let p = &seq1().problems[3];
        let prog = parse("(define (pow4 x) (define (sqr x) (* x x)) (sqr (sqr x)))").unwrap();
        let Verdict::Pass(t) = check_solution(&prog, p, ExecBudget::new(10_000)).verdict else { panic!() };
        assert!(matches!(check_solution(&prog, p, ExecBudget::new(t)).verdict, Verdict::Pass(u) if u == t));
    }

    #[test]
    fn boolean_problems() {
        let s = seq1();
        let nand = parse("(define (nand a b) (not (and a b)))").unwrap();
        assert!(matches!(check_solution(&nand, &s.problems[4], ExecBudget::new(1000)).verdict, Verdict::Pass(_)));
        let xor = parse("(define (xor a b) (not (eq? a b)))").unwrap();
        assert!(matches!(check_solution(&xor, &s.problems[5], ExecBudget::new(1000)).verdict, Verdict::Pass(_)));
    }

    #[test]
    fn inversion_fixtures() {
        let id = inversion_examples(InversionTarget::Identity, &[5.0]).unwrap();
        assert_eq!(id, vec![Example { args: vec![Datum::Int(5)], expected: Datum::Int(5) }]);
        let r = inversion_examples(InversionTarget::Reciprocal, &[4.0]).unwrap();
        assert_eq!(r, vec![Example { args: vec![Datum::Real(0.25)], expected: Datum::Int(4) }]);
        let s = inversion_examples(InversionTarget::Sqrt, &[9.0]).unwrap();
        assert_eq!(s, vec![Example { args: vec![Datum::Int(3)], expected: Datum::Int(9) }]);
        assert!(inversion_examples(InversionTarget::Reciprocal, &[0.0]).is_err());
        assert!(inversion_examples(InversionTarget::Sqrt, &[-1.0]).is_err());
    }

    #[test]
    fn shipped_inversions_match_generator() {
        let s = load_sequence(SEQ0).unwrap();
        let targets = [InversionTarget::Identity, InversionTarget::Reciprocal, InversionTarget::Sqrt];
        let points = [[5.0, 9.0, 2.0], [4.0, 2.0, 5.0], [2.0, 3.0, 5.0]];
        for ((p, t), pts) in s.problems.iter().zip(targets).zip(points) {
            assert_eq!(p.examples, inversion_examples(t, &pts).unwrap(), "{}", p.id);
        }
    }
}
