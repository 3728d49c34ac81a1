//! Cycle-counted interpreter for a Scheme subset without I/O.

pub mod builtins;
pub mod compile;
pub mod eval;
pub mod syntax;
pub mod value;

pub use builtins::{matches_expected, Arity};
pub use compile::{compile, CompileError, Program};
pub use eval::{evaluate, Evaluator, ExecBudget, ExecOutcome, ExecStatus};
pub use syntax::{parse, parse_datum, Datum, ParseError, ProgramAst};
pub use value::{SchemeValue, Value};

use crate::intern::Atom;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown procedure `{0}`")]
pub struct UnknownProcedure(pub String);

/// Arity of a standard procedure, as the grammar must respect it.
pub fn stdlib_arity(name: &str) -> Result<Arity, UnknownProcedure> {
    builtins::TABLE
        .lookup(Atom::new(name))
        .map(|id| builtins::TABLE.get(id).arity)
        .ok_or_else(|| UnknownProcedure(name.to_string()))
}

/// Names and arities of every standard procedure, in manifest order.
pub fn stdlib() -> Vec<(String, Arity)> {
    builtins::manifest_entries()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str, cycles: u64) -> ExecOutcome {
        evaluate(&parse(src).unwrap(), ExecBudget::new(cycles), &[])
    }

    fn int(src: &str) -> i64 {
        match run(src, 10_000_000).status {
            ExecStatus::Value(Value::Int(n)) => n,
            other => panic!("{src}: {other:?}"),
        }
    }

    #[test]
    fn beta_reduction() {
        let out = run("((lambda (x) (* x x)) 7)", 10_000);
        assert!(matches!(out.value(), Some(Value::Int(49))));
        // app, lambda, 7, apply closure, body app, *, x, x, apply builtin
        assert_eq!(out.cycles_used, 9);
    }

    #[test]
    fn divergence_hits_budget() {
        let out = run("(define (loop) (loop)) (loop)", 100);
        assert!(out.is_time_limit());
        assert_eq!(out.cycles_used, 100);
    }

    #[test]
    fn zero_budget() {
        let out = run("1", 0);
        assert!(out.is_time_limit());
        assert_eq!(out.cycles_used, 0);
    }

    #[test]
    fn type_error() {
        assert!(run("(car 5)", 10_000).is_error());
        assert!(run("(undefined-thing 1)", 10_000).is_error());
        assert!(run("((lambda (x) x))", 10_000).is_error());
        assert!(run("(/ 1 0)", 10_000).is_error());
    }

    #[test]
    fn pow4() {
        let src = "(define (pow4 x) (define (sqr x) (* x x)) (sqr (sqr x))) (pow4 2)";
        assert_eq!(int(src), 16);
    }

    #[test]
    fn tail_calls_run_in_constant_depth() {
        let tail = "(define (count n acc) (if (= n 0) acc (count (- n 1) (+ acc 1)))) (count 100000 0)";
        assert_eq!(int(tail), 100_000);
        let deep = "(define (count n) (if (= n 0) 0 (+ 1 (count (- n 1))))) (count 100000)";
        assert!(run(deep, 10_000_000).is_error());
    }

    #[test]
    fn derived_forms() {
        assert_eq!(int("(let ((x 2) (y 3)) (* x y))"), 6);
        assert_eq!(int("(let* ((x 2) (y (* x 3))) y)"), 6);
        assert_eq!(int("(letrec ((f (lambda (n) (if (= n 0) 1 (* n (f (- n 1))))))) (f 5))"), 120);
        assert_eq!(int("(let loop ((i 0) (s 0)) (if (= i 5) s (loop (+ i 1) (+ s i))))"), 10);
        assert_eq!(int("(cond ((= 1 2) 1) ((assv 2 '((1 . 10) (2 . 20))) => cdr) (else 3))"), 20);
        assert_eq!(int("(case (* 2 3) ((2 3 5 7) 1) ((1 4 6 8 9) 2) (else 3))"), 2);
        assert_eq!(int("(do ((i 0 (+ i 1)) (s 0 (+ s i))) ((= i 4) s))"), 6);
        assert_eq!(int("(define x 1) (set! x (+ x 41)) x"), 42);
    }

    #[test]
    fn control_procedures() {
        assert_eq!(int("(apply + 1 2 '(3 4))"), 10);
        assert_eq!(int("(length (map (lambda (x y) (+ x y)) '(1 2 3) '(4 5 6)))"), 3);
        assert_eq!(int("(car (map (lambda (x) (* x x)) '(5 6)))"), 25);
        assert_eq!(int("(call-with-current-continuation (lambda (k) (+ 1 (k 41))))"), 41);
        assert_eq!(int("(call-with-values (lambda () (values 1 2)) +)"), 3);
        assert_eq!(int("(let ((p (delay (+ 1 2)))) (+ (force p) (force p)))"), 6);
        assert_eq!(int("(let ((n 0)) (for-each (lambda (x) (set! n (+ n x))) '(1 2 3)) n)"), 6);
    }

    #[test]
    fn numeric_tower() {
        let v = run("(expt 2 100)", 1000);
        assert_eq!(v.value().unwrap().to_string(), "1267650600228229401496703205376");
        let v = run("(sqrt 2)", 1000);
        assert!(matches!(v.value(), Some(Value::Real(x)) if (x - 2f64.sqrt()).abs() < 1e-15));
        assert!(matches!(run("(+ 1 2.5)", 100).value(), Some(Value::Real(x)) if *x == 3.5));
    }

    #[test]
    fn bindings_seed_the_global_environment() {
        let ast = parse("(* n n)").unwrap();
        let out = evaluate(&ast, ExecBudget::new(100), &[(Atom::new("n"), Datum::Int(12))]);
        assert!(matches!(out.value(), Some(Value::Int(144))));
    }

    #[test]
    fn evaluations_are_isolated() {
        let mut ev = Evaluator::new();
        let define = parse("(define x 5) (car x)").unwrap();
        assert!(ev.evaluate(&define, ExecBudget::new(100), &[]).is_error());
        assert!(ev.evaluate(&parse("x").unwrap(), ExecBudget::new(100), &[]).is_error());
    }

    #[test]
    fn arities() {
        assert_eq!(stdlib_arity("car"), Ok(Arity::Fixed(1)));
        assert_eq!(stdlib_arity("+"), Ok(Arity::AtLeast(0)));
        assert!(stdlib_arity("read").is_err());
    }
}
