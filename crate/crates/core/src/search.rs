//! Levin search over the grammar: probability-limited depth-first
//! enumeration inside a doubling time schedule.

use std::time::Instant;

use log::info;

use crate::derivation::{DerivationError, SententialForm, Step};
use crate::grammar::{parse_symbols, Action, GrammarError, Nt, ProdKey, Scfg, Symbol};
use crate::machine::{compile, parse, Evaluator, ExecBudget};
use crate::problems::{Checker, ProblemSpec, Verdict};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{what} out of domain: {value}")]
pub struct DomainError {
    pub what: &'static str,
    pub value: f64,
}

/// `t_q / t`: the least probability worth generating when the phase budget
/// is `t`, since anything less would get under one quantum.
pub fn probability_horizon(quantum: u64, t: u64) -> Result<f64, DomainError> {
    if quantum == 0 || t < quantum {
        return Err(DomainError { what: "phase budget", value: t as f64 });
    }
    Ok(quantum as f64 / t as f64)
}

/// Conceptual jump size `t / p`.
pub fn cjs(p: f64, t: f64) -> Result<f64, DomainError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(DomainError { what: "probability", value: p });
    }
    if t.is_nan() || t <= 0.0 {
        return Err(DomainError { what: "running time", value: t });
    }
    Ok(t / p)
}

/// `-log2 p`, in bits.
pub fn entropy(p: f64) -> Result<f64, DomainError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(DomainError { what: "probability", value: p });
    }
    Ok(-p.log2())
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub initial_limit: u64,
    pub quantum: u64,
    pub max_phases: u32,
    pub workers: usize,
    /// Overrides the problem's start form.
    pub start: Option<SententialForm>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { initial_limit: 1_000_000, quantum: 100, max_phases: 20, workers: 1, start: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SearchStats {
    pub trials: u64,
    pub errors: u64,
    pub cycles: u64,
    /// Total budget `T_k` of the last phase run.
    pub max_cycles: u64,
    pub wall_time: f64,
}

impl SearchStats {
    fn absorb(&mut self, o: &SearchStats) {
        self.trials += o.trials;
        self.errors += o.errors;
        self.cycles += o.cycles;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRecord {
    pub problem_id: String,
    pub arity: usize,
    pub program: String,
    /// Nonterminals of the start form, in order.
    pub roots: Vec<Nt>,
    pub steps: Vec<Step>,
    pub log_prob: f64,
    pub p: f64,
    pub t: u64,
    pub stats: SearchStats,
}

impl SolutionRecord {
    pub fn trace(&self) -> Vec<ProdKey> {
        self.steps.iter().map(|s| s.key).collect()
    }

    pub fn cjs(&self) -> f64 {
        self.t as f64 / self.p
    }

    pub fn entropy(&self) -> f64 {
        -self.log_prob
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SearchError {
    #[error("no solution within {phases} phases ({} trials)", .stats.trials)]
    Exhausted { phases: u32, stats: SearchStats },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("bad start form: {0}")]
    StartForm(#[from] DerivationError),
    #[error(transparent)]
    Config(#[from] DomainError),
}

/// The start form for `problem`: its own `start` line if it has one,
/// otherwise `(define (<name> <fresh>...) <start>)` with the parameters in
/// scope inside the body.
pub fn start_form(g: &Scfg, problem: &ProblemSpec) -> Result<SententialForm, SearchError> {
    let symbols = match &problem.start {
        Some(text) => parse_symbols(g, text)?,
        None => {
            let n = problem.arity;
            let mut s = vec![
                Symbol::terminal("("),
                Symbol::terminal("define"),
                Symbol::terminal("("),
                Symbol::terminal(&problem.id),
            ];
            s.extend(std::iter::repeat_n(Symbol::A(Action::Fresh), n));
            s.push(Symbol::terminal(")"));
            s.extend(std::iter::repeat_n(Symbol::A(Action::Push), n));
            s.push(Symbol::N(g.start()));
            s.push(Symbol::terminal(")"));
            s.extend(std::iter::repeat_n(Symbol::A(Action::Pop), n));
            s
        }
    };
    Ok(SententialForm::new(symbols)?)
}

/// Forms never grow past this many symbols.
const MAX_FORM_LEN: usize = 4096;

/// Children of `form` with non-zero probability, most probable first.
fn children(g: &Scfg, form: &SententialForm) -> Vec<SententialForm> {
    form.alternatives(g)
        .iter()
        .filter(|e| e.prob > 0.0)
        .filter_map(|e| form.expand_leftmost(e).ok())
        .filter(|f| f.symbols.len() <= MAX_FORM_LEN)
        .collect()
}

/// Expands the most probable incomplete form until there are at least
/// `8 * n_workers` forms (or nothing left to expand), then deals them out
/// greedily, most probable first, to the least-loaded worker.
pub fn partition_toplevel(g: &Scfg, start: &SententialForm, n_workers: usize) -> Vec<Vec<SententialForm>> {
    let n_workers = n_workers.max(1);
    let mut frontier = vec![start.clone()];
    if n_workers > 1 {
        while frontier.len() < 8 * n_workers {
            let best = frontier
                .iter()
                .enumerate()
                .filter(|(_, f)| !f.is_complete())
                .max_by(|a, b| a.1.log_prob.total_cmp(&b.1.log_prob).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i);
            let Some(i) = best else { break };
            let form = frontier.remove(i);
            let kids = children(g, &form);
            frontier.splice(i..i, kids);
        }
    }
    let probs: Vec<f64> = frontier.iter().map(|f| f.probability()).collect();
    let assignment = assign_greedy(&probs, n_workers);
    let mut out = vec![Vec::new(); n_workers];
    for (form, w) in frontier.into_iter().zip(assignment) {
        out[w].push(form);
    }
    out
}

/// Worker index for each weight: heaviest first onto the least-loaded
/// worker, ties to the lowest index.
pub fn assign_greedy(weights: &[f64], n_workers: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut load = vec![0.0f64; n_workers.max(1)];
    let mut out = vec![0; weights.len()];
    for i in order {
        let w = (0..load.len()).min_by(|&a, &b| load[a].total_cmp(&load[b]).then(a.cmp(&b))).expect("a worker");
        load[w] += weights[i];
        out[i] = w;
    }
    out
}

/// Visits every complete sentence derivable from `start` with probability
/// at least `horizon`, once each, higher-probability alternatives first.
/// Returns the number of sentences visited.
pub fn enumerate_dfs(g: &Scfg, start: &SententialForm, horizon: f64, visit: &mut impl FnMut(&SententialForm)) -> u64 {
    let floor = horizon.log2() - 1e-9;
    let mut visited = 0;
    if start.log_prob < floor {
        return 0;
    }
    let mut stack = vec![start.clone()];
    while let Some(form) = stack.pop() {
        if form.is_complete() {
            visited += 1;
            visit(&form);
            continue;
        }
        let alts = form.alternatives(g);
        for e in alts.iter().rev() {
            if e.prob <= 0.0 || form.log_prob + e.prob.log2() < floor {
                continue;
            }
            if let Ok(child) = form.expand_leftmost(e) {
                if child.symbols.len() <= MAX_FORM_LEN {
                    stack.push(child);
                }
            }
        }
    }
    visited
}

struct Hit {
    form: SententialForm,
    trace: Vec<ProdKey>,
    t: u64,
}

fn better(a: &Hit, b: &Hit) -> bool {
    match a.form.log_prob.total_cmp(&b.form.log_prob) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a.trace < b.trace,
    }
}

fn run_worker(
    g: &Scfg,
    problem: &ProblemSpec,
    forms: &[SententialForm],
    horizon: f64,
    phase_budget: u64,
    quantum: u64,
) -> (SearchStats, Option<Hit>) {
    let checker = Checker::new(problem);
    let mut ev = Evaluator::new();
    let mut stats = SearchStats::default();
    let mut best: Option<Hit> = None;
    for form in forms {
        enumerate_dfs(g, form, horizon, &mut |cand| {
            let text = cand.text().expect("complete form");
            let budget = ExecBudget::new(((cand.probability() * phase_budget as f64).floor() as u64).max(quantum));
            stats.trials += 1;
            let compiled = parse(&text).ok().and_then(|ast| compile(&ast).ok());
            let Some(def) = compiled else {
                stats.errors += 1;
                return;
            };
            let out = checker.check_compiled(&mut ev, &def, budget);
            stats.cycles += out.cycles;
            match out.verdict {
                Verdict::Pass(t) => {
                    let hit = Hit { form: cand.clone(), trace: cand.trace(), t };
                    if best.as_ref().is_none_or(|b| better(&hit, b)) {
                        best = Some(hit);
                    }
                }
                Verdict::Error => stats.errors += 1,
                Verdict::Fail | Verdict::TimeLimit => {}
            }
        });
    }
    (stats, best)
}

/// Searches phases `k = 0, 1, ...` with budget `T_k = 2^k * initial_limit`
/// and horizon `quantum / T_k`. Every candidate of a phase is run; the most
/// probable passing one wins (ties to the smaller derivation trace), so the
/// result does not depend on the number of workers.
pub fn levin_search(g: &Scfg, problem: &ProblemSpec, config: &SearchConfig) -> Result<SolutionRecord, SearchError> {
    let clock = Instant::now();
    let start = match &config.start {
        Some(f) => f.clone(),
        None => start_form(g, problem)?,
    };
    probability_horizon(config.quantum, config.initial_limit)?;
    let parts = partition_toplevel(g, &start, config.workers);
    let mut total = SearchStats::default();
    for k in 0..config.max_phases {
        let budget = config.initial_limit.saturating_mul(1u64 << k.min(63));
        let horizon = probability_horizon(config.quantum, budget)?;
        let results: Vec<(SearchStats, Option<Hit>)> = std::thread::scope(|s| {
            let handles: Vec<_> = parts
                .iter()
                .map(|forms| s.spawn(|| run_worker(g, problem, forms, horizon, budget, config.quantum)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("search worker panicked")).collect()
        });
        let mut best: Option<Hit> = None;
        for (w, (stats, hit)) in results.into_iter().enumerate() {
            info!("phase={k} worker={w} trials={} errors={} cycles={}", stats.trials, stats.errors, stats.cycles);
            total.absorb(&stats);
            if let Some(h) = hit {
                if best.as_ref().is_none_or(|b| better(&h, b)) {
                    best = Some(h);
                }
            }
        }
        total.max_cycles = budget;
        if let Some(hit) = best {
            total.wall_time = clock.elapsed().as_secs_f64();
            return Ok(SolutionRecord {
                problem_id: problem.id.clone(),
                arity: problem.arity,
                program: hit.form.text().expect("complete"),
                roots: start.nonterminals(),
                steps: hit.form.steps(),
                log_prob: hit.form.log_prob,
                p: hit.form.probability(),
                t: hit.t,
                stats: total,
            });
        }
    }
    total.wall_time = clock.elapsed().as_secs_f64();
    Err(SearchError::Exhausted { phases: config.max_phases, stats: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::load_grammar;

    fn sentences(g: &Scfg, horizon: f64) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        enumerate_dfs(g, &SententialForm::start(g), horizon, &mut |f| out.push((f.text().unwrap(), f.probability())));
        out
    }

    #[test]
    fn horizon_values() {
        assert_eq!(probability_horizon(1, 1_000_000).unwrap(), 1e-6);
        assert_eq!(probability_horizon(7, 7).unwrap(), 1.0);
        assert_eq!(probability_horizon(100, 1_000_000).unwrap(), 1e-4);
        assert!(probability_horizon(100, 10).is_err());
    }

    #[test]
    fn cjs_and_entropy() {
        assert!((cjs(0.0277, 15.0).unwrap() - 541.5162454873646).abs() < 1e-9);
        assert_eq!(cjs(1.0, 37.0).unwrap(), 37.0);
        assert_eq!(entropy(1.0).unwrap(), 0.0);
        assert!(cjs(0.0, 1.0).is_err());
        assert!(entropy(1.5).is_err());
    }

    #[test]
    fn both_at_horizon() {
        let g = load_grammar("S -> \"a\" @0.5\nS -> \"b\" @0.5").unwrap();
        let got: Vec<_> = sentences(&g, 0.5).into_iter().map(|s| s.0).collect();
        assert_eq!(got, ["a", "b"]);
    }

    #[test]
    fn recursive_grammar() {
        let g = load_grammar("S -> \"a\" @0.6\nS -> S \"a\" @0.4").unwrap();
        let got: Vec<_> = sentences(&g, 0.1).into_iter().map(|s| s.0).collect();
        assert_eq!(got, ["a", "a a"]);
    }

    #[test]
    fn nothing_at_certainty() {
        let g = load_grammar("S -> \"a\" @0.6\nS -> S \"a\" @0.4").unwrap();
        assert!(sentences(&g, 1.0).is_empty());
    }

    #[test]
    fn greedy_assignment() {
        assert_eq!(assign_greedy(&[0.5, 0.3, 0.2], 2), vec![0, 1, 1]);
        assert_eq!(assign_greedy(&[0.5, 0.3, 0.2], 1), vec![0, 0, 0]);
        assert_eq!(assign_greedy(&[0.4], 3), vec![0]);
    }

    #[test]
    fn partition_covers_enumeration() {
        let g = load_grammar("S -> A A @1\nA -> \"x\" @0.5\nA -> \"y\" @0.3\nA -> A \"z\" @0.2").unwrap();
        let start = SententialForm::start(&g);
        let mut whole = Vec::new();
        enumerate_dfs(&g, &start, 0.01, &mut |f| whole.push(f.text().unwrap()));
        whole.sort();
        for n in [1, 2, 3] {
            let parts = partition_toplevel(&g, &start, n);
            assert_eq!(parts.len(), n);
            let mut got = Vec::new();
            for forms in &parts {
                for f in forms {
                    enumerate_dfs(&g, f, 0.01, &mut |c| got.push(c.text().unwrap()));
                }
            }
            got.sort();
            assert_eq!(got, whole, "workers={n}");
        }
    }

    fn problem(text: &str) -> ProblemSpec {
        crate::problems::load_sequence(text).unwrap().problems.remove(0)
    }

    fn shipped() -> Scfg {
        load_grammar(crate::grammar::SHIPPED_GRAMMAR).unwrap()
    }

    #[test]
    fn finds_identity() {
        let g = shipped();
        let p = problem(
            "sequence s\nproblem identity kind=operator-induction arity=1 tol=1e-6\nex (5) -> 5\nex (9) -> 9\n",
        );
        let r = levin_search(&g, &p, &SearchConfig::default()).unwrap();
        assert!(r.stats.trials > 0);
        assert!(r.t > 0);
        assert!(r.stats.errors <= r.stats.trials);
        let ast = crate::machine::parse(&r.program).unwrap();
        let out = crate::problems::check_solution(&ast, &p, ExecBudget::new(1000));
        assert_eq!(out.verdict, Verdict::Pass(r.t));
        let replayed = crate::derivation::replay(&g, &start_form(&g, &p).unwrap(), &r.trace()).unwrap();
        assert_eq!(replayed.text().unwrap(), r.program);
        assert!((replayed.probability() - r.p).abs() <= 1e-12 * r.p);
        assert!((r.p * r.entropy().exp2() - 1.0).abs() < 1e-9);
        assert!((cjs(r.p, r.t as f64).unwrap() * r.p - r.t as f64).abs() < 1e-9 * r.t as f64);
        assert!((entropy(r.p).unwrap() + r.p.log2()).abs() < 1e-9);
        assert!(r.stats.cycles as f64 <= 8.0 * r.cjs().max(1_000_000.0));
    }

    #[test]
    fn contradiction_exhausts() {
        let g = shipped();
        let p = problem("sequence s\nproblem f kind=operator-induction arity=1 tol=1e-6\nex (1) -> 2\nex (1) -> 3\n");
        let cfg = SearchConfig { max_phases: 2, ..SearchConfig::default() };
        match levin_search(&g, &p, &cfg) {
            Err(SearchError::Exhausted { phases, stats }) => {
                assert_eq!(phases, 2);
                assert!(stats.trials > 0);
                assert_eq!(stats.max_cycles, 2_000_000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fixed_prefix() {
        let g = shipped();
        let p = problem(
            "sequence s\nproblem f kind=operator-induction arity=1 tol=1e-6\nex (3) -> 9\nex (4) -> 16\nstart \"(\" \"define\" \"(\" \"f\" <fresh> \")\" <push> \"(\" \"*\" expression expression \")\" \")\" <pop>\n",
        );
        let r = levin_search(&g, &p, &SearchConfig::default()).unwrap();
        assert_eq!(r.program, "(define (f var0) (* var0 var0))");
        assert_eq!(r.roots.len(), 2);
        let explicit = SearchConfig { start: Some(start_form(&g, &p).unwrap()), ..SearchConfig::default() };
        let mut plain = p.clone();
        plain.start = None;
        let again = levin_search(&g, &plain, &explicit).unwrap();
        assert_eq!(again.program, r.program);
        assert_eq!(again.stats.trials, r.stats.trials);
    }

    #[test]
    fn worker_count_invariant() {
        let g = shipped();
        let p = problem("sequence s\nproblem sqr kind=operator-induction arity=1 tol=1e-6\nex (2) -> 4\nex (3) -> 9\n");
        let base = levin_search(&g, &p, &SearchConfig::default()).unwrap();
        for workers in [2, 3] {
            let r = levin_search(&g, &p, &SearchConfig { workers, ..SearchConfig::default() }).unwrap();
            assert_eq!(
                (r.program.as_str(), r.stats.trials, r.stats.cycles, r.t),
                (base.program.as_str(), base.stats.trials, base.stats.cycles, base.t)
            );
            assert_eq!(r.p, base.p);
        }
    }

    #[test]
    fn bad_config() {
        let g = shipped();
        let p = problem("sequence s\nproblem f kind=operator-induction arity=1 tol=1e-6\nex (1) -> 1\n");
        let cfg = SearchConfig { initial_limit: 10, quantum: 100, ..SearchConfig::default() };
        assert!(matches!(levin_search(&g, &p, &cfg), Err(SearchError::Config(_))));
    }
}
