//! Line-oriented grammar format.
//!
//! ```text
//! # comment
//! %start body
//! %nonterminal name            # fixes nonterminal order
//! %proc head kind @mass
//! %stdlib head [argument]      # one call production per standard procedure
//! %solution id name arity "tok" ...
//! %next-id n
//! head -> sym ... [@prob] [origin=o id=n sol=j]
//! ```
//!
//! Terminals are double-quoted, nonterminals bare, actions `<fresh>`,
//! `<push>`, `<pop>`, `<define:j>`. Alternatives without `@prob` share the
//! mass their head has left.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Action, GrammarError, Nt, Origin, ProcKind, Production, Scfg, Solution, Symbol};
use crate::intern::Atom;
use crate::machine;

pub const SHIPPED_GRAMMAR: &str = include_str!("../../data/scheme.grammar");

/// Parses and validates a grammar.
pub fn load_grammar(text: &str) -> Result<Scfg, GrammarError> {
    let g = parse_grammar(text)?;
    let violations = g.validate();
    if violations.is_empty() {
        Ok(g)
    } else {
        Err(GrammarError::Validation(violations))
    }
}

struct PendingProduction {
    head: Nt,
    body: Vec<Symbol>,
    prob: Option<f64>,
    origin: Origin,
    id: Option<u32>,
    solution: Option<u32>,
}

fn err(line: usize, msg: impl Into<String>) -> GrammarError {
    GrammarError::Parse { line, msg: msg.into() }
}

/// Parses a grammar without validating it.
pub fn parse_grammar(text: &str) -> Result<Scfg, GrammarError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();

    let start = lines
        .iter()
        .find_map(|(_, l)| l.strip_prefix("%start").map(|s| s.trim().to_string()))
        .or_else(|| lines.iter().find_map(|(_, l)| l.split_once("->").map(|(h, _)| h.trim().to_string())))
        .ok_or_else(|| err(0, "empty grammar"))?;
    check_name(&start, 0)?;
    let mut g = Scfg::new(&start);

    let mut pending = Vec::new();
    let mut stdlib = Vec::new();
    let mut next_id = None;

    for &(ln, line) in &lines {
        if let Some(rest) = line.strip_prefix('%') {
            let words = split_words(rest, ln)?;
            let (directive, args) = words.split_first().ok_or_else(|| err(ln, "empty directive"))?;
            match (directive.as_str(), args) {
                ("start", [_]) => {}
                ("nonterminal", [name]) => {
                    check_name(name, ln)?;
                    g.intern_nt(name);
                }
                ("proc", [head, kind, mass]) => {
                    let kind =
                        ProcKind::from_name(kind).ok_or_else(|| err(ln, format!("unknown procedure kind `{kind}`")))?;
                    let mass = parse_prob(mass, ln)?;
                    check_name(head, ln)?;
                    let head = g.intern_nt(head);
                    g.add_proc(head, kind, mass);
                }
                ("stdlib", [head]) => stdlib.push((ln, head.clone(), "expression".to_string())),
                ("stdlib", [head, arg]) => stdlib.push((ln, head.clone(), arg.clone())),
                ("solution", [id, name, arity, tokens @ ..]) => {
                    let id: u32 = id.parse().map_err(|_| err(ln, "bad solution id"))?;
                    let arity: usize = arity.parse().map_err(|_| err(ln, "bad solution arity"))?;
                    let tokens = tokens
                        .iter()
                        .map(|t| {
                            unquote(t)
                                .map(|s| Atom::new(&s))
                                .ok_or_else(|| err(ln, format!("solution token `{t}` is not quoted")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if g.solution(id).is_some() {
                        return Err(err(ln, format!("duplicate solution {id}")));
                    }
                    g.add_solution(Solution::new(id, Atom::new(name), arity, tokens));
                }
                ("next-id", [n]) => next_id = Some(n.parse::<u32>().map_err(|_| err(ln, "bad next-id"))?),
                _ => return Err(err(ln, format!("bad directive `%{rest}`"))),
            }
            continue;
        }
        let (head, rhs) = line.split_once("->").ok_or_else(|| err(ln, "expected `head -> body`"))?;
        let head = head.trim();
        check_name(head, ln)?;
        let head = g.intern_nt(head);
        let mut p =
            PendingProduction { head, body: Vec::new(), prob: None, origin: Origin::Initial, id: None, solution: None };
        for word in split_words(rhs, ln)? {
            if let Some(t) = unquote(&word) {
                if t.is_empty() || t.contains(|c: char| c.is_whitespace() || c == '[' || c == ']') {
                    return Err(err(
                        ln,
                        format!("terminal {word} must be a non-empty token without spaces or brackets"),
                    ));
                }
                p.body.push(Symbol::T(Atom::new(&t)));
            } else if let Some(prob) = word.strip_prefix('@') {
                p.prob = Some(parse_prob(prob, ln)?);
            } else if let Some(a) = parse_action(&word) {
                p.body.push(Symbol::A(a));
            } else if let Some((key, value)) = word.split_once('=') {
                match key {
                    "origin" => {
                        p.origin = Origin::from_name(value).ok_or_else(|| err(ln, format!("bad origin `{value}`")))?
                    }
                    "id" => p.id = Some(value.parse().map_err(|_| err(ln, "bad id"))?),
                    "sol" => p.solution = Some(value.parse().map_err(|_| err(ln, "bad sol"))?),
                    _ => return Err(err(ln, format!("unknown attribute `{key}`"))),
                }
            } else {
                check_name(&word, ln)?;
                p.body.push(Symbol::N(g.intern_nt(&word)));
            }
        }
        pending.push(p);
    }

    // Shares for alternatives without an explicit probability.
    let mut explicit: HashMap<Nt, f64> = HashMap::new();
    let mut implicit: HashMap<Nt, usize> = HashMap::new();
    for p in &pending {
        match p.prob {
            Some(x) => *explicit.entry(p.head).or_default() += x,
            None => *implicit.entry(p.head).or_default() += 1,
        }
    }
    let share = |g: &Scfg, head: Nt| {
        let left = 1.0 - explicit.get(&head).copied().unwrap_or(0.0) - g.proc_mass(head);
        left / implicit[&head] as f64
    };

    let mut seen_ids = std::collections::HashSet::new();
    for p in pending.iter().filter(|p| p.id.is_some()) {
        let id = p.id.expect("filtered");
        if !seen_ids.insert(id) {
            return Err(err(0, format!("duplicate production id {id}")));
        }
        let prob = p.prob.unwrap_or_else(|| share(&g, p.head));
        g.insert_production(Production {
            id,
            head: p.head,
            body: p.body.clone().into(),
            prob,
            origin: p.origin,
            solution: p.solution,
        });
    }
    if let Some(n) = next_id {
        g.reserve_ids(n);
    }
    for p in pending.iter().filter(|p| p.id.is_none()) {
        let prob = p.prob.unwrap_or_else(|| share(&g, p.head));
        g.add_production(p.head, p.body.clone(), prob, p.origin, p.solution);
    }

    if !stdlib.is_empty() {
        let entries = machine::stdlib();
        for (_, head, arg) in stdlib {
            let head = g.intern_nt(&head);
            let arg = g.intern_nt(&arg);
            g.add_stdlib(head, arg, &entries);
        }
    }
    Ok(g)
}

/// Parses a sentential form written in production-body syntax; every
/// nonterminal must already exist in `g`.
pub fn parse_symbols(g: &Scfg, text: &str) -> Result<Vec<Symbol>, GrammarError> {
    split_words(text, 0)?
        .into_iter()
        .map(|w| {
            if let Some(t) = unquote(&w) {
                Ok(Symbol::T(Atom::new(&t)))
            } else if let Some(a) = parse_action(&w) {
                Ok(Symbol::A(a))
            } else {
                g.require_nt(&w).map(Symbol::N)
            }
        })
        .collect()
}

/// Inverse of [`parse_symbols`].
pub fn symbols_text(g: &Scfg, symbols: &[Symbol]) -> String {
    symbols.iter().map(|&s| symbol(g, s)).collect::<Vec<_>>().join(" ")
}

fn check_name(name: &str, ln: usize) -> Result<(), GrammarError> {
    let ok =
        !name.is_empty() && !name.contains(|c: char| c.is_whitespace() || "\"@<>[]=%:#".contains(c)) && name != "->";
    if ok {
        Ok(())
    } else {
        Err(err(ln, format!("bad nonterminal name `{name}`")))
    }
}

fn parse_prob(s: &str, ln: usize) -> Result<f64, GrammarError> {
    s.trim_start_matches('@').parse::<f64>().map_err(|_| err(ln, format!("bad probability `{s}`")))
}

fn parse_action(word: &str) -> Option<Action> {
    Some(match word {
        "<fresh>" => Action::Fresh,
        "<push>" => Action::Push,
        "<pop>" => Action::Pop,
        _ => Action::Define(word.strip_prefix("<define:")?.strip_suffix('>')?.parse().ok()?),
    })
}

/// Splits on whitespace, keeping quoted terminals (with `\"` and `\\`
/// escapes) intact.
fn split_words(s: &str, ln: usize) -> Result<Vec<String>, GrammarError> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut word = String::new();
        if c == '"' {
            word.push(chars.next().expect("peeked"));
            loop {
                match chars.next() {
                    None => return Err(err(ln, "unterminated terminal")),
                    Some('\\') => {
                        word.push('\\');
                        word.push(chars.next().ok_or_else(|| err(ln, "dangling escape"))?);
                    }
                    Some('"') => {
                        word.push('"');
                        break;
                    }
                    Some(ch) => word.push(ch),
                }
            }
        } else {
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() {
                    break;
                }
                word.push(ch);
                chars.next();
            }
        }
        out.push(word);
    }
    Ok(out)
}

fn unquote(word: &str) -> Option<String> {
    let inner = word.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            out.push(chars.next()?);
        } else {
            out.push(c);
        }
    }
    Some(out)
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn symbol(g: &Scfg, s: Symbol) -> String {
    match s {
        Symbol::T(a) => quote(&a.name()),
        Symbol::N(n) => g.name(n).to_string(),
        Symbol::A(a) => super::action_text(a),
    }
}

/// Canonical text: every probability and id explicit, so parsing it back
/// yields an equal grammar.
pub fn to_text(g: &Scfg) -> String {
    let mut out = String::new();
    writeln!(out, "%start {}", g.name(g.start())).unwrap();
    for n in g.nonterminals() {
        writeln!(out, "%nonterminal {}", g.name(n)).unwrap();
    }
    for spec in g.procs() {
        writeln!(out, "%proc {} {} @{}", g.name(spec.head), spec.kind.name(), spec.mass).unwrap();
    }
    for s in g.solutions() {
        write!(out, "%solution {} {} {}", s.id, s.name, s.arity).unwrap();
        for t in &s.tokens {
            write!(out, " {}", quote(&t.name())).unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "%next-id {}", g.next_production_id()).unwrap();
    for p in g.all_productions() {
        write!(out, "{} ->", g.name(p.head)).unwrap();
        for &s in p.body.iter() {
            write!(out, " {}", symbol(g, s)).unwrap();
        }
        write!(out, " @{} origin={} id={}", p.prob, p.origin.name(), p.id).unwrap();
        if let Some(j) = p.solution {
            write!(out, " sol={j}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        let g = load_grammar("S -> \"a\" @1.0").unwrap();
        assert_eq!(g.productions(g.start()).count(), 1);
    }

    #[test]
    fn short_sum_rejected() {
        let e = load_grammar("S -> \"a\" @0.5\nS -> \"b\" @0.4").unwrap_err();
        assert!(matches!(e, GrammarError::Validation(v) if matches!(v[..], [super::super::Violation::Sum { .. }])));
    }

    #[test]
    fn uniform_default_and_remaining_share() {
        let g = load_grammar("S -> \"a\" @0.5\nS -> \"b\"\nS -> \"c\"").unwrap();
        let probs: Vec<f64> = g.productions(g.start()).map(|p| p.prob).collect();
        assert_eq!(probs, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn dangling_and_unreachable() {
        let g = parse_grammar("S -> A @1.0\nB -> \"b\" @1.0").unwrap();
        let v = g.validate();
        assert!(v.iter().any(|x| matches!(x, super::super::Violation::Dangling { symbol, .. } if symbol == "A")));
        assert!(v.iter().any(|x| matches!(x, super::super::Violation::Unreachable(n) if n == "B")));
    }

    #[test]
    fn unproductive() {
        let v = parse_grammar("S -> S \"a\" @1.0").unwrap().validate();
        assert!(v.iter().any(|x| matches!(x, super::super::Violation::Unproductive(n) if n == "S")));
    }

    #[test]
    fn shipped_is_valid_and_round_trips() {
        let g = load_grammar(SHIPPED_GRAMMAR).unwrap();
        assert!(g.validate().is_empty());
        let text = to_text(&g);
        let back = load_grammar(&text).unwrap();
        assert_eq!(g, back);
        assert_eq!(text, to_text(&back));
    }

    #[test]
    fn quoting() {
        assert_eq!(unquote(&quote("a\"b\\c")).unwrap(), "a\"b\\c");
        let words = split_words(r#"x -> "a b" "\"" y"#, 1).unwrap();
        assert_eq!(words, vec!["x", "->", "\"a b\"", "\"\\\"\"", "y"]);
    }

    #[test]
    fn bad_lines() {
        assert!(parse_grammar("S \"a\"").is_err());
        assert!(parse_grammar("S -> \"a\" @x").is_err());
        assert!(parse_grammar("%bogus").is_err());
        assert!(parse_grammar("S -> \"unterminated").is_err());
    }
}
