//! Heuristic algorithmic memory: the solution corpus and the updates that
//! rewrite the grammar between problems.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::derivation::{build_forest, decode_tree, encode_tree, prune_one_level, DerivationError, Step, Tree};
use crate::grammar::{parse_grammar, to_text, Nt, Origin, ProdKey, Scfg, Solution, Symbol};
use crate::intern::Atom;
use crate::search::{SearchStats, SolutionRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MemoryError {
    #[error("solution `{0}` is already in memory")]
    DuplicateSolutionId(String),
    #[error("record for `{0}` has no usable derivation")]
    MissingDerivation(String),
    #[error("corrupt memory encoding: {0}")]
    CorruptEncoding(String),
    #[error(transparent)]
    Derivation(#[from] DerivationError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamConfig {
    /// Smoothing factor.
    pub alpha: f64,
    /// Share of a new solution among the previous-solution calls.
    pub gamma: f64,
    /// Share of a new idiom set among the abstract expressions.
    pub idiom_mass: f64,
    pub support: usize,
    /// Pruning stops once an abstract form has at most this many symbols.
    pub prune_cutoff: usize,
}

impl Default for HamConfig {
    fn default() -> Self {
        HamConfig { alpha: 0.125, gamma: 0.5, idiom_mass: 0.5, support: 2, prune_cutoff: 3 }
    }
}

/// A solved problem together with its derivation trees.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub record: SolutionRecord,
    pub trees: Vec<Tree>,
}

impl CorpusRecord {
    /// Wall time is dropped so that stored state depends only on the search.
    pub fn new(mut record: SolutionRecord) -> Result<CorpusRecord, MemoryError> {
        record.stats.wall_time = 0.0;
        if record.steps.is_empty() {
            return Err(MemoryError::MissingDerivation(record.problem_id));
        }
        let trees = build_forest(&record.roots, &record.steps)
            .map_err(|_| MemoryError::MissingDerivation(record.problem_id.clone()))?;
        Ok(CorpusRecord { record, trees })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequentSubtree {
    pub tree: Tree,
    pub support: usize,
}

/// `alpha * ratio + (1 - alpha) * prev`.
pub fn smooth(alpha: f64, ratio: f64, prev: f64) -> f64 {
    alpha * ratio + (1.0 - alpha) * prev
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamState {
    pub scfg: Scfg,
    pub corpus: Vec<CorpusRecord>,
    /// Last smoothed value of each static production, as a share of its
    /// head's static mass.
    pub smoothing: BTreeMap<u32, f64>,
    pub config: HamConfig,
}

const SECTION: &str = "%%";
const IDIOM_PREFIX: &str = "idiom-";

impl HamState {
    pub fn new(scfg: Scfg) -> HamState {
        HamState { scfg, corpus: Vec::new(), smoothing: BTreeMap::new(), config: HamConfig::default() }
    }

    /// Appends `record` to the corpus and runs the four updates in order.
    pub fn full_update(&mut self, record: &SolutionRecord) -> Result<(), MemoryError> {
        self.check_new(record)?;
        self.corpus.push(CorpusRecord::new(record.clone())?);
        self.add_previous_solution(record)?;
        self.learn_idioms(record)?;
        self.mine_frequent_subprograms();
        self.update_probabilities()?;
        Ok(())
    }

    fn check_new(&self, record: &SolutionRecord) -> Result<(), MemoryError> {
        let name = Atom::new(&record.problem_id);
        if self.scfg.solutions().iter().any(|s| s.name == name) {
            return Err(MemoryError::DuplicateSolutionId(record.problem_id.clone()));
        }
        Ok(())
    }

    /// Registers the solution's definition and adds a call to it under the
    /// previous-solution hook at probability gamma. Returns the solution id.
    pub fn add_previous_solution(&mut self, record: &SolutionRecord) -> Result<u32, MemoryError> {
        self.check_new(record)?;
        if crate::machine::parse(&record.program).is_err() {
            return Err(MemoryError::MissingDerivation(record.problem_id.clone()));
        }
        let id = self.scfg.solutions().iter().map(|s| s.id + 1).max().unwrap_or(0);
        let name = Atom::new(&record.problem_id);
        self.scfg.add_solution(Solution::new(id, name, record.arity, tokens_of(&record.program)));

        let hook = self.scfg.hooks().previous_solution;
        let old: Vec<(u32, f64)> = self.scfg.productions(hook).map(|p| (p.id, p.prob)).collect();
        let share = if old.is_empty() { 1.0 } else { self.config.gamma };
        for (pid, prob) in old {
            self.scfg.set_prob(pid, prob * (1.0 - share));
        }
        let expr = self.expression_nt();
        let mut body = vec![Symbol::terminal("("), Symbol::T(name)];
        body.extend(std::iter::repeat_n(Symbol::N(expr), record.arity));
        body.push(Symbol::terminal(")"));
        self.scfg.add_production(hook, body, share, Origin::Solution, Some(id));
        Ok(id)
    }

    fn expression_nt(&self) -> Nt {
        self.scfg.nt("expression").unwrap_or(self.scfg.start())
    }

    /// Nonterminals whose subtrees are never copied into learned forms.
    fn opaque(&self) -> Vec<Nt> {
        let h = self.scfg.hooks();
        let mut v = vec![h.previous_solution, h.solution_corpus, h.abstract_expression, h.frequent_expression];
        v.extend(self.scfg.nt("variable"));
        v
    }

    fn expression_subtrees(&self, trees: &[Tree]) -> Vec<Tree> {
        let opaque = self.opaque();
        let expr = self.expression_nt();
        let mut out = Vec::new();
        for t in trees {
            let cut = cut_nodes(t, &opaque);
            cut.for_each_subtree(&mut |s| {
                if matches!(s, Tree::Node(n, _) if *n == expr) {
                    out.push(s.clone());
                }
            });
        }
        out
    }

    /// Abstract forms obtained by repeatedly pruning every expression subtree
    /// of `record` (until a form is down to the prune cutoff), collected into
    /// a new idiom nonterminal under the abstract-expression hook. Returns
    /// the number of new forms.
    pub fn learn_idioms(&mut self, record: &SolutionRecord) -> Result<usize, MemoryError> {
        let rec = CorpusRecord::new(record.clone())?;
        let mut known: HashSet<Vec<Symbol>> =
            self.scfg.all_productions().filter(|p| p.origin == Origin::Idiom).map(|p| p.body.to_vec()).collect();
        let mut forms = Vec::new();
        for sub in self.expression_subtrees(&rec.trees) {
            let mut t = sub;
            while t.height() > 0 {
                t = prune_one_level(&t)?;
                let syms = t.frontier_symbols();
                if syms.len() < 2 {
                    break;
                }
                let small = syms.len() <= self.config.prune_cutoff;
                if known.insert(syms.clone()) {
                    forms.push(syms);
                }
                if small {
                    break;
                }
            }
        }
        if forms.is_empty() {
            return Ok(0);
        }
        let k = (0..).find(|k| self.scfg.nt(&format!("{IDIOM_PREFIX}{k}")).is_none()).expect("free name");
        let idiom = self.scfg.intern_nt(&format!("{IDIOM_PREFIX}{k}"));
        let each = 1.0 / forms.len() as f64;
        for body in &forms {
            self.scfg.add_production(idiom, body.clone(), each, Origin::Idiom, None);
        }
        let hook = self.scfg.hooks().abstract_expression;
        let old: Vec<(u32, f64)> = self.scfg.productions(hook).map(|p| (p.id, p.prob)).collect();
        let share = if old.is_empty() { 1.0 } else { self.config.idiom_mass };
        for (pid, prob) in old {
            self.scfg.set_prob(pid, prob * (1.0 - share));
        }
        self.scfg.add_production(hook, vec![Symbol::N(idiom)], share, Origin::Idiom, None);
        Ok(forms.len())
    }

    /// Rewrites the frequent-expression hook with the frequent expression
    /// subtrees of the whole corpus, weighted by support.
    pub fn mine_frequent_subprograms(&mut self) -> Vec<FrequentSubtree> {
        let trees: Vec<Tree> = self.corpus.iter().flat_map(|r| r.trees.iter().cloned()).collect();
        let db = self.expression_subtrees(&trees);
        let found = mine(&self.scfg, &db, self.config.support);
        let hook = self.scfg.hooks().frequent_expression;
        let old: Vec<u32> = self.scfg.productions(hook).map(|p| p.id).collect();
        for id in old {
            self.scfg.remove_production(id);
        }
        let mut seen = HashSet::new();
        let bodies: Vec<(Vec<Symbol>, usize)> = found
            .iter()
            .map(|f| (f.tree.frontier_symbols(), f.support))
            .filter(|(b, _)| seen.insert(b.clone()))
            .collect();
        let total: usize = bodies.iter().map(|b| b.1).sum();
        for (body, support) in bodies {
            self.scfg.add_production(hook, body, support as f64 / total as f64, Origin::Mined, None);
        }
        found
    }

    /// Smooths every static production of each head seen in the corpus
    /// towards its relative frequency there.
    pub fn update_probabilities(&mut self) -> Result<(), MemoryError> {
        if self.corpus.is_empty() {
            return Err(MemoryError::MissingDerivation("empty corpus".into()));
        }
        let mut counts: HashMap<u32, usize> = HashMap::new();
        let mut per_head: BTreeMap<Nt, usize> = BTreeMap::new();
        for rec in &self.corpus {
            if rec.record.steps.is_empty() {
                return Err(MemoryError::MissingDerivation(rec.record.problem_id.clone()));
            }
            for step in &rec.record.steps {
                if let ProdKey::Static(id) = step.key {
                    if self.scfg.production(id).is_some() {
                        *counts.entry(id).or_default() += 1;
                        *per_head.entry(step.head).or_default() += 1;
                    }
                }
            }
        }
        for (head, n) in per_head {
            let mass = 1.0 - self.scfg.proc_mass(head);
            let prods: Vec<(u32, f64)> = self.scfg.productions(head).map(|p| (p.id, p.prob)).collect();
            let static_total: f64 = prods.iter().map(|p| p.1).sum();
            let mut next = Vec::with_capacity(prods.len());
            for (id, prob) in &prods {
                let prev = if static_total > 0.0 { prob / static_total } else { 0.0 };
                let ratio = counts.get(id).copied().unwrap_or(0) as f64 / n as f64;
                next.push((*id, smooth(self.config.alpha, ratio, prev)));
            }
            let sum: f64 = next.iter().map(|p| p.1).sum();
            for (id, s) in next {
                self.smoothing.insert(id, s);
                self.scfg.set_prob(id, mass * s / sum);
            }
        }
        Ok(())
    }

    /// Canonical text encoding; its length is the memory size metric.
    pub fn serialize(&self) -> String {
        let mut out = to_text(&self.scfg);
        writeln!(out, "{SECTION}").unwrap();
        let c = &self.config;
        writeln!(
            out,
            "config alpha={} gamma={} idiom-mass={} support={} prune-cutoff={}",
            c.alpha, c.gamma, c.idiom_mass, c.support, c.prune_cutoff
        )
        .unwrap();
        for (id, s) in &self.smoothing {
            writeln!(out, "smooth {id} {s}").unwrap();
        }
        for rec in &self.corpus {
            let r = &rec.record;
            let s = &r.stats;
            writeln!(
                out,
                "record {} arity={} p={} log-prob={} t={} trials={} errors={} cycles={} max-cycles={}",
                r.problem_id, r.arity, r.p, r.log_prob, r.t, s.trials, s.errors, s.cycles, s.max_cycles
            )
            .unwrap();
            writeln!(out, "program {}", r.program).unwrap();
            write!(out, "roots").unwrap();
            for n in &r.roots {
                write!(out, " {}", self.scfg.name(*n)).unwrap();
            }
            out.push('\n');
            write!(out, "steps").unwrap();
            for st in &r.steps {
                write!(out, " {}:{}", st.key.encode(), st.prob).unwrap();
            }
            out.push('\n');
            for t in &rec.trees {
                writeln!(out, "tree {}", encode_tree(&self.scfg, t)).unwrap();
            }
        }
        out
    }

    pub fn size_bytes(&self) -> usize {
        self.serialize().len()
    }

    pub fn deserialize(text: &str) -> Result<HamState, MemoryError> {
        let corrupt = |m: String| MemoryError::CorruptEncoding(m);
        let (gtext, rest) =
            text.split_once(&format!("\n{SECTION}\n")).ok_or_else(|| corrupt("missing section separator".into()))?;
        let scfg = parse_grammar(gtext).map_err(|e| corrupt(e.to_string()))?;
        let mut ham = HamState::new(scfg);
        let mut pending: Option<SolutionRecord> = None;
        let mut trees: Vec<Tree> = Vec::new();
        let mut raw_steps: Vec<(ProdKey, f64)> = Vec::new();
        let flush =
            |ham: &mut HamState, rec: Option<SolutionRecord>, trees: &mut Vec<Tree>, raw: &mut Vec<(ProdKey, f64)>| {
                if let Some(mut r) = rec {
                    r.steps =
                        steps_from_trees(trees, raw).ok_or_else(|| corrupt(format!("steps of `{}`", r.problem_id)))?;
                    ham.corpus.push(CorpusRecord { record: r, trees: std::mem::take(trees) });
                    raw.clear();
                }
                Ok::<(), MemoryError>(())
            };
        for (ln, line) in rest.lines().enumerate() {
            let bad = || corrupt(format!("line {}: {line}", ln + 1));
            let (tag, body) = line.split_once(' ').unwrap_or((line, ""));
            match tag {
                "config" => {
                    let kv = key_values(body);
                    let get = |k: &str| kv.get(k).ok_or_else(bad);
                    ham.config = HamConfig {
                        alpha: num(get("alpha")?).ok_or_else(bad)?,
                        gamma: num(get("gamma")?).ok_or_else(bad)?,
                        idiom_mass: num(get("idiom-mass")?).ok_or_else(bad)?,
                        support: num(get("support")?).ok_or_else(bad)?,
                        prune_cutoff: num(get("prune-cutoff")?).ok_or_else(bad)?,
                    };
                }
                "smooth" => {
                    let (id, v) = body.split_once(' ').ok_or_else(bad)?;
                    ham.smoothing.insert(num(id).ok_or_else(bad)?, num(v).ok_or_else(bad)?);
                }
                "record" => {
                    flush(&mut ham, pending.take(), &mut trees, &mut raw_steps)?;
                    let (id, fields) = body.split_once(' ').ok_or_else(bad)?;
                    let kv = key_values(fields);
                    let get = |k: &str| kv.get(k).ok_or_else(bad);
                    pending = Some(SolutionRecord {
                        problem_id: id.to_string(),
                        arity: num(get("arity")?).ok_or_else(bad)?,
                        program: String::new(),
                        roots: Vec::new(),
                        steps: Vec::new(),
                        log_prob: num(get("log-prob")?).ok_or_else(bad)?,
                        p: num(get("p")?).ok_or_else(bad)?,
                        t: num(get("t")?).ok_or_else(bad)?,
                        stats: SearchStats {
                            trials: num(get("trials")?).ok_or_else(bad)?,
                            errors: num(get("errors")?).ok_or_else(bad)?,
                            cycles: num(get("cycles")?).ok_or_else(bad)?,
                            max_cycles: num(get("max-cycles")?).ok_or_else(bad)?,
                            wall_time: 0.0,
                        },
                    });
                }
                "program" => pending.as_mut().ok_or_else(bad)?.program = body.to_string(),
                "roots" => {
                    let r = pending.as_mut().ok_or_else(bad)?;
                    r.roots =
                        body.split_whitespace().map(|n| ham.scfg.nt(n).ok_or_else(bad)).collect::<Result<_, _>>()?;
                }
                "steps" => {
                    raw_steps = body
                        .split_whitespace()
                        .map(|w| {
                            let (k, p) = w.split_once(':')?;
                            Some((ProdKey::decode(k)?, num(p)?))
                        })
                        .collect::<Option<_>>()
                        .ok_or_else(bad)?;
                }
                "tree" => trees.push(decode_tree(&ham.scfg, body)?),
                "" => {}
                _ => return Err(bad()),
            }
        }
        flush(&mut ham, pending.take(), &mut trees, &mut raw_steps)?;
        Ok(ham)
    }
}

/// Tokens of rendered program text: parentheses, and runs of anything else
/// between whitespace.
fn tokens_of(program: &str) -> Vec<Atom> {
    let spaced = program.replace('(', " ( ").replace(')', " ) ");
    spaced.split_whitespace().map(Atom::new).collect()
}

fn key_values(s: &str) -> HashMap<&str, &str> {
    s.split_whitespace().filter_map(|w| w.split_once('=')).collect()
}

fn num<T: std::str::FromStr>(s: &str) -> Option<T> {
    s.parse().ok()
}

/// Rebuilds the step list from trees in leftmost order.
fn steps_from_trees(trees: &[Tree], raw: &[(ProdKey, f64)]) -> Option<Vec<Step>> {
    let mut out = Vec::with_capacity(raw.len());
    fn walk(t: &Tree, raw: &[(ProdKey, f64)], out: &mut Vec<Step>) -> Option<()> {
        if let Tree::Node(n, cs) = t {
            let (key, prob) = *raw.get(out.len())?;
            out.push(Step { key, head: *n, body: cs.iter().map(Tree::label).collect(), prob });
            for c in cs {
                walk(c, raw, out)?;
            }
        }
        Some(())
    }
    for t in trees {
        walk(t, raw, &mut out)?;
    }
    (out.len() == raw.len()).then_some(out)
}

/// Replaces every internal node headed by one of `heads` with a leaf.
pub fn cut_nodes(t: &Tree, heads: &[Nt]) -> Tree {
    match t {
        Tree::Node(n, _) if heads.contains(n) => Tree::Leaf(Symbol::N(*n)),
        Tree::Node(n, cs) => Tree::Node(*n, cs.iter().map(|c| cut_nodes(c, heads)).collect()),
        Tree::Leaf(_) => t.clone(),
    }
}

/// Whether `pattern` occurs at the root of `t`. Nonterminal leaves of the
/// pattern match any subtree with that label.
pub fn matches_at(pattern: &Tree, t: &Tree) -> bool {
    match (pattern, t) {
        (Tree::Leaf(Symbol::N(a)), _) => t.label() == Symbol::N(*a),
        (Tree::Leaf(a), Tree::Leaf(b)) => a == b,
        (Tree::Node(a, ps), Tree::Node(b, cs)) => {
            a == b && ps.len() == cs.len() && ps.iter().zip(cs).all(|(p, c)| matches_at(p, c))
        }
        _ => false,
    }
}

/// A single expanded node whose nonterminal children are left as leaves.
fn shallow(t: &Tree) -> Tree {
    match t {
        Tree::Node(n, cs) => Tree::Node(*n, cs.iter().map(|c| Tree::Leaf(c.label())).collect()),
        Tree::Leaf(_) => t.clone(),
    }
}

/// Patterns one expansion larger than `p`, taken from the places where
/// `t` is deeper than `p`.
fn extensions(p: &Tree, t: &Tree, out: &mut Vec<Tree>) {
    let (Tree::Node(n, ps), Tree::Node(_, cs)) = (p, t) else { return };
    for (i, (pc, tc)) in ps.iter().zip(cs).enumerate() {
        let grown: Vec<Tree> = match (pc, tc) {
            (Tree::Leaf(Symbol::N(_)), Tree::Node(..)) => vec![shallow(tc)],
            (Tree::Node(..), _) => {
                let mut v = Vec::new();
                extensions(pc, tc, &mut v);
                v
            }
            _ => continue,
        };
        for g in grown {
            let mut kids = ps.clone();
            kids[i] = g;
            out.push(Tree::Node(*n, kids));
        }
    }
}

/// Patterns one expansion smaller than `p`: each non-root internal node
/// whose children are all leaves collapsed back to a leaf.
fn reductions(p: &Tree) -> Vec<Tree> {
    let Tree::Node(n, ps) = p else { return Vec::new() };
    let mut out = Vec::new();
    for (i, c) in ps.iter().enumerate() {
        let Tree::Node(cn, cc) = c else { continue };
        let mut smaller = Vec::new();
        if cc.iter().all(|x| matches!(x, Tree::Leaf(_))) {
            smaller.push(Tree::Leaf(Symbol::N(*cn)));
        }
        smaller.extend(reductions(c));
        for s in smaller {
            let mut kids = ps.clone();
            kids[i] = s;
            out.push(Tree::Node(*n, kids));
        }
    }
    out
}

/// Every rooted pattern (at least its root expanded, each other node either
/// fully expanded or left as a nonterminal leaf) occurring at the root of
/// at least `threshold` trees of `db`. Grown one expansion per level; a
/// candidate is counted only if all its one-smaller patterns are frequent.
/// Ordered by descending support, then encoding.
pub fn mine(g: &Scfg, db: &[Tree], threshold: usize) -> Vec<FrequentSubtree> {
    let support = |p: &Tree| db.iter().filter(|t| matches_at(p, t)).count();
    let mut level: BTreeMap<String, (Tree, usize)> = BTreeMap::new();
    for t in db.iter().filter(|t| matches!(t, Tree::Node(..))) {
        let p = shallow(t);
        let e = encode_tree(g, &p);
        level.entry(e).or_insert((p, 0)).1 += 1;
    }
    level.retain(|_, v| v.1 >= threshold);
    let mut all: Vec<FrequentSubtree> = Vec::new();
    while !level.is_empty() {
        let mut candidates: BTreeMap<String, Tree> = BTreeMap::new();
        for (p, _) in level.values() {
            for t in db.iter().filter(|t| matches_at(p, t)) {
                let mut ext = Vec::new();
                extensions(p, t, &mut ext);
                for c in ext {
                    candidates.entry(encode_tree(g, &c)).or_insert(c);
                }
            }
        }
        let mut next = BTreeMap::new();
        for (e, c) in candidates {
            if !reductions(&c).iter().all(|r| level.contains_key(&encode_tree(g, r))) {
                continue;
            }
            let s = support(&c);
            if s >= threshold {
                next.insert(e, (c, s));
            }
        }
        all.extend(
            std::mem::replace(&mut level, next).into_values().map(|(tree, support)| FrequentSubtree { tree, support }),
        );
    }
    let mut keyed: Vec<(String, FrequentSubtree)> = all.into_iter().map(|f| (encode_tree(g, &f.tree), f)).collect();
    keyed.sort_by(|a, b| b.1.support.cmp(&a.1.support).then_with(|| a.0.cmp(&b.0)));
    keyed.into_iter().map(|(_, f)| f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivation::SententialForm;
    use crate::grammar::{load_grammar, GenerationContext, SHIPPED_GRAMMAR};
    use crate::problems::{load_sequence, SEQ1};
    use crate::search::{levin_search, SearchConfig};

    /// Derives from the start symbol taking alternative `picks[i]` at step i.
    fn record(g: &Scfg, id: &str, picks: &[usize]) -> SolutionRecord {
        let mut f = SententialForm::start(g);
        for &i in picks {
            let e = f.alternatives(g).remove(i);
            f = f.expand_leftmost(&e).unwrap();
        }
        assert!(f.is_complete());
        SolutionRecord {
            problem_id: id.into(),
            arity: 0,
            program: f.text().unwrap(),
            roots: vec![g.start()],
            steps: f.steps(),
            log_prob: f.log_prob,
            p: f.probability(),
            t: 1,
            stats: SearchStats::default(),
        }
    }

    fn probs(g: &Scfg, head: &str) -> Vec<f64> {
        g.productions(g.nt(head).unwrap()).map(|p| p.prob).collect()
    }

    const XY: &str = "%start expression\nexpression -> \"x\" @0.5\nexpression -> \"y\" @0.5\nother -> \"z\" @0.25\nother -> \"w\" @0.75\nexpression -> other @0";

    #[test]
    fn smoothing_step() {
        assert_eq!(smooth(0.125, 1.0, 0.5), 0.5625);
        let g = load_grammar("%start expression\nexpression -> \"x\" @0.5\nexpression -> \"y\" @0.5").unwrap();
        let mut h = HamState::new(g.clone());
        h.corpus.push(CorpusRecord::new(record(&g, "a", &[0])).unwrap());
        h.update_probabilities().unwrap();
        assert_eq!(probs(&h.scfg, "expression"), vec![0.5625, 0.4375]);
    }

    #[test]
    fn smoothing_fixed_point_and_absent_head() {
        let g = load_grammar(XY).unwrap();
        let mut h = HamState::new(g.clone());
        h.corpus.push(CorpusRecord::new(record(&g, "a", &[0])).unwrap());
        h.corpus.push(CorpusRecord::new(record(&g, "b", &[1])).unwrap());
        h.update_probabilities().unwrap();
        assert_eq!(probs(&h.scfg, "expression"), vec![0.5, 0.5, 0.0]);
        assert_eq!(probs(&h.scfg, "other"), vec![0.25, 0.75]);
    }

    #[test]
    fn empty_corpus_rejected() {
        let mut h = HamState::new(load_grammar(XY).unwrap());
        assert!(matches!(h.update_probabilities(), Err(MemoryError::MissingDerivation(_))));
    }

    #[test]
    fn previous_solution_shares() {
        let g = load_grammar(XY).unwrap();
        let mut h = HamState::new(g.clone());
        let hook = h.scfg.hooks().previous_solution;
        h.add_previous_solution(&record(&g, "s1", &[0])).unwrap();
        assert_eq!(h.scfg.productions(hook).map(|p| p.prob).collect::<Vec<_>>(), vec![1.0]);
        h.add_previous_solution(&record(&g, "s2", &[1])).unwrap();
        assert_eq!(h.scfg.productions(hook).map(|p| p.prob).collect::<Vec<_>>(), vec![0.5, 0.5]);
        h.add_previous_solution(&record(&g, "s3", &[1])).unwrap();
        assert_eq!(h.scfg.productions(hook).map(|p| p.prob).collect::<Vec<_>>(), vec![0.25, 0.25, 0.5]);
        assert_eq!(
            h.add_previous_solution(&record(&g, "s2", &[0])).unwrap_err(),
            MemoryError::DuplicateSolutionId("s2".into())
        );
    }

    #[test]
    fn defined_solution_has_zero_mass() {
        let g = load_grammar(SHIPPED_GRAMMAR).unwrap();
        let mut h = HamState::new(g);
        let seq = load_sequence(SEQ1).unwrap();
        let r = levin_search(&h.scfg, &seq.problems[0], &SearchConfig::default()).unwrap();
        h.full_update(&r).unwrap();
        let corpus = h.scfg.hooks().solution_corpus;
        let mut ctx = GenerationContext::default();
        let fresh = h.scfg.productions_for(corpus, &ctx).unwrap();
        assert!(fresh.iter().all(|e| e.prob > 0.0));
        ctx.apply(crate::grammar::Action::Define(0)).unwrap();
        let again = h.scfg.productions_for(corpus, &ctx).unwrap();
        assert!(again.iter().all(|e| e.prob == 0.0));
        assert_eq!(h.full_update(&r).unwrap_err(), MemoryError::DuplicateSolutionId("sqr".into()));
    }

    const BAB: &str = "%start expression\nexpression -> B A B @0.5\nexpression -> \"e\" @0.5\nB -> \"bb\" @0.5\nB -> \"bbb\" @0.5\nA -> \"a\" @1";

    #[test]
    fn idiom_from_pruning_example() {
        let g = load_grammar(BAB).unwrap();
        let mut h = HamState::new(g.clone());
        let n = h.learn_idioms(&record(&g, "r", &[0, 0, 0, 1])).unwrap();
        assert_eq!(n, 1);
        let idiom = h.scfg.nt("idiom-0").unwrap();
        let forms: Vec<String> =
            h.scfg.productions(idiom).map(|p| crate::grammar::symbols_text(&h.scfg, &p.body)).collect();
        assert_eq!(forms, vec!["B A B"]);
        assert_eq!(probs(&h.scfg, "abstract-expression"), vec![1.0]);
        assert!(h.scfg.validate().is_empty());
        let again = h.learn_idioms(&record(&g, "r2", &[0, 1, 0, 0])).unwrap();
        assert_eq!(again, 0);
    }

    #[test]
    fn leaf_solution_learns_nothing() {
        let g = load_grammar(BAB).unwrap();
        let mut h = HamState::new(g.clone());
        assert_eq!(h.learn_idioms(&record(&g, "r", &[1])).unwrap(), 0);
        assert_eq!(h.scfg, g);
    }

    #[test]
    fn idioms_per_prune_level() {
        let text = "%start expression\nexpression -> \"(\" P P P \")\" @0.5\nexpression -> \"e\" @0.5\nP -> \"<\" Q Q \">\" @1\nQ -> \"q\" \"q\" @1";
        let g = load_grammar(text).unwrap();
        let mut h = HamState::new(g.clone());
        let r = record(&g, "r", &[0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        let tree = &CorpusRecord::new(r.clone()).unwrap().trees[0];
        assert_eq!(tree.height(), 3);
        assert_eq!(h.learn_idioms(&r).unwrap(), 2);
        let idiom = h.scfg.nt("idiom-0").unwrap();
        let forms: Vec<String> =
            h.scfg.productions(idiom).map(|p| crate::grammar::symbols_text(&h.scfg, &p.body)).collect();
        assert_eq!(forms, vec!["\"(\" \"<\" Q Q \">\" \"<\" Q Q \">\" \"<\" Q Q \">\" \")\"", "\"(\" P P P \")\""]);
    }

    #[test]
    fn mining_shared_subprogram() {
        let g = load_grammar(SHIPPED_GRAMMAR).unwrap();
        let mut h = HamState::new(g.clone());
        let seq = load_sequence(SEQ1).unwrap();
        let sqr = levin_search(&g, &seq.problems[0], &SearchConfig::default()).unwrap();
        h.corpus.push(CorpusRecord::new(sqr.clone()).unwrap());
        let mut twin = sqr.clone();
        twin.problem_id = "sqr2".into();
        h.corpus.push(CorpusRecord::new(twin).unwrap());
        let found = h.mine_frequent_subprograms();
        let whole = h.expression_subtrees(&h.corpus[0].trees)[0].clone();
        assert!(found.iter().any(|f| f.tree == whole && f.support == 2));
        let hook = h.scfg.hooks().frequent_expression;
        let total: f64 = h.scfg.productions(hook).map(|p| p.prob).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(h.scfg.validate().is_empty());
    }

    #[test]
    fn mining_single_tree_without_repeats() {
        let g = load_grammar(BAB).unwrap();
        let mut h = HamState::new(g.clone());
        h.corpus.push(CorpusRecord::new(record(&g, "r", &[0, 0, 0, 1])).unwrap());
        assert!(h.mine_frequent_subprograms().is_empty());
        assert_eq!(h.scfg.productions(h.scfg.hooks().frequent_expression).count(), 0);
    }

    #[test]
    fn serialization() {
        let g = load_grammar(SHIPPED_GRAMMAR).unwrap();
        let mut h = HamState::new(g);
        let fresh = h.serialize();
        assert_eq!(HamState::deserialize(&fresh).unwrap(), h);
        let seq = load_sequence(SEQ1).unwrap();
        let r = levin_search(&h.scfg, &seq.problems[0], &SearchConfig::default()).unwrap();
        h.full_update(&r).unwrap();
        let text = h.serialize();
        assert_eq!(text, h.serialize());
        assert!(text.len() > fresh.len());
        assert_eq!(HamState::deserialize(&text).unwrap(), h);
        assert!(matches!(HamState::deserialize("junk"), Err(MemoryError::CorruptEncoding(_))));
        let broken = text.replace("\nsteps ", "\nsteps s9999:0.5 ");
        assert!(HamState::deserialize(&broken).is_err());
    }
}
