use std::fmt;

use super::{Scfg, Symbol};

pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Static probabilities plus procedural mass of `head` do not sum to 1.
    Sum {
        head: String,
        total: f64,
    },
    /// A probability or procedural mass outside [0, 1].
    Range {
        head: String,
        prob: f64,
    },
    /// `symbol` is used in a body of `head` but has no alternatives.
    Dangling {
        head: String,
        symbol: String,
    },
    Unreachable(String),
    Unproductive(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Sum { head, total } => write!(f, "`{head}` probabilities sum to {total}"),
            Violation::Range { head, prob } => write!(f, "`{head}` has probability {prob} outside [0, 1]"),
            Violation::Dangling { head, symbol } => write!(f, "`{head}` refers to undefined `{symbol}`"),
            Violation::Unreachable(n) => write!(f, "`{n}` is unreachable"),
            Violation::Unproductive(n) => write!(f, "`{n}` derives no sentence"),
        }
    }
}

pub fn validate(g: &Scfg) -> Vec<Violation> {
    let mut out = Vec::new();
    let hooks = g.hooks();
    let defined = |n: super::Nt| g.productions(n).next().is_some() || g.procs_for(n).next().is_some();

    for head in g.nonterminals() {
        let name = g.name(head);
        for p in g.productions(head) {
            if !(0.0..=1.0).contains(&p.prob) {
                out.push(Violation::Range { head: name.into(), prob: p.prob });
            }
            for s in p.body.iter() {
                if let Symbol::N(n) = s {
                    if !defined(*n) && !hooks.contains(*n) {
                        out.push(Violation::Dangling { head: name.into(), symbol: g.name(*n).into() });
                    }
                }
            }
        }
        for spec in g.procs_for(head) {
            if !(0.0..=1.0).contains(&spec.mass) {
                out.push(Violation::Range { head: name.into(), prob: spec.mass });
            }
        }
        if defined(head) {
            let total: f64 = g.productions(head).map(|p| p.prob).sum::<f64>() + g.proc_mass(head);
            let empty_hook = hooks.contains(head) && total == 0.0;
            if !empty_hook && (total - 1.0).abs() > SUM_TOLERANCE {
                out.push(Violation::Sum { head: name.into(), total });
            }
        }
    }

    let n = g.nonterminals().count();
    // Productive: some alternative derives a terminal string.
    let mut productive: Vec<bool> = g.nonterminals().map(|h| g.procs_for(h).next().is_some()).collect();
    loop {
        let mut changed = false;
        for head in g.nonterminals() {
            if productive[head.0 as usize] {
                continue;
            }
            let ok = g.productions(head).any(|p| {
                p.body.iter().all(|s| match s {
                    Symbol::N(m) => productive[m.0 as usize],
                    _ => true,
                })
            });
            if ok {
                productive[head.0 as usize] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut reachable = vec![false; n];
    let mut todo = vec![g.start()];
    for h in g.nonterminals().filter(|&h| hooks.contains(h)) {
        todo.push(h);
    }
    while let Some(h) = todo.pop() {
        if std::mem::replace(&mut reachable[h.0 as usize], true) {
            continue;
        }
        for p in g.productions(h) {
            todo.extend(p.body.iter().filter_map(|s| s.as_nt()));
        }
    }
    for head in g.nonterminals() {
        let i = head.0 as usize;
        if hooks.contains(head) || !defined(head) {
            continue;
        }
        if !reachable[i] {
            out.push(Violation::Unreachable(g.name(head).into()));
        }
        if !productive[i] {
            out.push(Violation::Unproductive(g.name(head).into()));
        }
    }
    out
}
