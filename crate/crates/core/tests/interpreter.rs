mod common;

use common::{DIVERGENT, FIXTURES};
use ham::machine::{evaluate, matches_expected, parse, parse_datum, ExecBudget, ExecStatus};

const BUDGET: u64 = 10_000_000;

#[test]
fn enough_fixtures() {
    assert!(FIXTURES.len() >= 50);
}

#[test]
fn fixtures_evaluate_to_expected_values() {
    let mut failures = Vec::new();
    for (src, want) in FIXTURES {
        let ast = parse(src).unwrap_or_else(|e| panic!("{src}: {e}"));
        let want = parse_datum(want).unwrap();
        let first = evaluate(&ast, ExecBudget::new(BUDGET), &[]);
        let second = evaluate(&ast, ExecBudget::new(BUDGET), &[]);
        assert_eq!(first.cycles_used, second.cycles_used, "{src}");
        assert!(first.cycles_used > 0, "{src}");
        match &first.status {
            ExecStatus::Value(v) if matches_expected(v, &want, 1e-12) => {}
            other => failures.push(format!("{src}: got {other:?}, want {want:?}")),
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn divergent_programs_stop_at_budget() {
    for src in DIVERGENT {
        let ast = parse(src).unwrap();
        for budget in [1, 100, 12_345] {
            let out = evaluate(&ast, ExecBudget::new(budget), &[]);
            assert!(out.is_time_limit(), "{src}");
            assert_eq!(out.cycles_used, budget, "{src}");
        }
    }
}

#[test]
fn errors_are_values_not_panics() {
    for src in ["(car 1)", "(+ 'a 1)", "(undefined-thing)", "(1 2)", "((lambda (x) x))", "(vector-ref 1 2)"] {
        let out = evaluate(&parse(src).unwrap(), ExecBudget::new(1000), &[]);
        assert!(out.is_error(), "{src}: {:?}", out.status);
    }
}
