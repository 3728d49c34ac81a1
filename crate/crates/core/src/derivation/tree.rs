use std::fmt::Write as _;

use super::{DerivationError, SententialForm, Step};
use crate::grammar::{action_text, Action, Nt, Scfg, Symbol};
use crate::intern::Atom;

/// A derivation tree. Leaves are terminals, actions, or (once pruned)
/// nonterminals.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Tree {
    Node(Nt, Vec<Tree>),
    Leaf(Symbol),
}

impl Tree {
    pub fn label(&self) -> Symbol {
        match self {
            Tree::Node(n, _) => Symbol::N(*n),
            Tree::Leaf(s) => *s,
        }
    }

    /// Height in internal levels: 0 for a leaf.
    pub fn height(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node(_, cs) => 1 + cs.iter().map(Tree::height).max().unwrap_or(0),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Node(_, cs) => 1 + cs.iter().map(Tree::node_count).sum::<usize>(),
        }
    }

    /// Pre-order visit of every subtree.
    pub fn for_each_subtree<'a>(&'a self, f: &mut impl FnMut(&'a Tree)) {
        f(self);
        if let Tree::Node(_, cs) = self {
            for c in cs {
                c.for_each_subtree(f);
            }
        }
    }

    /// Leaf labels left to right, actions included.
    pub fn frontier_symbols(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.collect_frontier(&mut out);
        out
    }

    fn collect_frontier(&self, out: &mut Vec<Symbol>) {
        match self {
            Tree::Leaf(s) => out.push(*s),
            Tree::Node(_, cs) => cs.iter().for_each(|c| c.collect_frontier(out)),
        }
    }
}

/// Trees for each root of a start form, consuming `steps` in leftmost order.
pub fn build_forest(roots: &[Nt], steps: &[Step]) -> Result<Vec<Tree>, DerivationError> {
    let mut it = steps.iter();
    let forest = roots.iter().map(|&r| build_node(r, &mut it)).collect::<Result<Vec<_>, _>>()?;
    if it.next().is_some() {
        return Err(DerivationError::TrailingSteps);
    }
    Ok(forest)
}

/// The tree of a complete derivation from the head of its first step.
pub fn build_tree(steps: &[Step]) -> Result<Tree, DerivationError> {
    let root = steps.first().ok_or(DerivationError::IncompleteDerivation)?.head;
    Ok(build_forest(&[root], steps)?.pop().expect("one root"))
}

fn build_node<'a>(head: Nt, it: &mut impl Iterator<Item = &'a Step>) -> Result<Tree, DerivationError> {
    let step = it.next().ok_or(DerivationError::IncompleteDerivation)?;
    if step.head != head {
        return Err(DerivationError::HeadMismatch {
            expected: format!("#{}", head.0),
            got: format!("#{}", step.head.0),
        });
    }
    let children = step
        .body
        .iter()
        .map(|&s| match s {
            Symbol::N(n) => build_node(n, it),
            other => Ok(Tree::Leaf(other)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Tree::Node(head, children))
}

/// Turns every internal node at the greatest internal depth into a leaf
/// labelled with its nonterminal.
pub fn prune_one_level(tree: &Tree) -> Result<Tree, DerivationError> {
    let h = tree.height();
    if h == 0 {
        return Err(DerivationError::AlreadyLeaf);
    }
    Ok(prune_at(tree, 0, h - 1))
}

fn prune_at(t: &Tree, depth: usize, target: usize) -> Tree {
    match t {
        Tree::Leaf(_) => t.clone(),
        Tree::Node(n, _) if depth == target => Tree::Leaf(Symbol::N(*n)),
        Tree::Node(n, cs) => Tree::Node(*n, cs.iter().map(|c| prune_at(c, depth + 1, target)).collect()),
    }
}

/// Leaves as a sentential form; actions are replayed in a fresh context.
pub fn frontier(tree: &Tree) -> Result<SententialForm, DerivationError> {
    SententialForm::new(tree.frontier_symbols())
}

/// Bracket encoding: `[Node <:NT:> child ...]`, `[Leaf token]`,
/// `[Leaf <:NT:>]` for nonterminal leaves.
pub fn encode_tree(g: &Scfg, t: &Tree) -> String {
    let mut out = String::new();
    encode_into(g, t, &mut out);
    out
}

fn encode_into(g: &Scfg, t: &Tree, out: &mut String) {
    match t {
        Tree::Node(n, cs) => {
            write!(out, "[Node <:{}:>", g.name(*n)).unwrap();
            for c in cs {
                out.push(' ');
                encode_into(g, c, out);
            }
            out.push(']');
        }
        Tree::Leaf(Symbol::N(n)) => write!(out, "[Leaf <:{}:>]", g.name(*n)).unwrap(),
        Tree::Leaf(Symbol::T(a)) => write!(out, "[Leaf {a}]").unwrap(),
        Tree::Leaf(Symbol::A(a)) => write!(out, "[Leaf {}]", action_text(*a)).unwrap(),
    }
}

#[derive(Debug, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Word(&'a str),
}

fn tokenize(s: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        if c == '[' || c == ']' || c.is_whitespace() {
            if let Some(st) = start.take() {
                out.push(Tok::Word(&s[st..i]));
            }
            match c {
                '[' => out.push(Tok::Open),
                ']' => out.push(Tok::Close),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(st) = start {
        out.push(Tok::Word(&s[st..]));
    }
    // `Node<:B:>` is accepted as `Node <:B:>`.
    let mut split = Vec::with_capacity(out.len());
    for t in out {
        match t {
            Tok::Word(w) if w.len() > 4 && (w.starts_with("Node<") || w.starts_with("Leaf<")) => {
                split.push(Tok::Word(&w[..4]));
                split.push(Tok::Word(&w[4..]));
            }
            other => split.push(other),
        }
    }
    split
}

/// Parses the bracket encoding against the nonterminals of `g`.
pub fn decode_tree(g: &Scfg, s: &str) -> Result<Tree, DerivationError> {
    let toks = tokenize(s);
    let mut pos = 0;
    let t = decode_at(g, &toks, &mut pos)?;
    if pos != toks.len() {
        return Err(DerivationError::CorruptEncoding("trailing input".into()));
    }
    Ok(t)
}

fn corrupt(msg: &str) -> DerivationError {
    DerivationError::CorruptEncoding(msg.into())
}

fn nt_label(g: &Scfg, w: &str) -> Result<Option<Nt>, DerivationError> {
    match w.strip_prefix("<:").and_then(|r| r.strip_suffix(":>")) {
        Some(name) => g.nt(name).map(Some).ok_or_else(|| corrupt(&format!("unknown nonterminal `{name}`"))),
        None => Ok(None),
    }
}

fn decode_at(g: &Scfg, toks: &[Tok<'_>], pos: &mut usize) -> Result<Tree, DerivationError> {
    let mut next = || {
        let t = toks.get(*pos);
        *pos += 1;
        t
    };
    if next() != Some(&Tok::Open) {
        return Err(corrupt("expected `[`"));
    }
    let kind = match next() {
        Some(Tok::Word(w)) => *w,
        _ => return Err(corrupt("expected Node or Leaf")),
    };
    let label = match next() {
        Some(Tok::Word(w)) => *w,
        _ => return Err(corrupt("missing label")),
    };
    match kind {
        "Leaf" => {
            let sym = if let Some(n) = nt_label(g, label)? {
                Symbol::N(n)
            } else {
                match label {
                    "<fresh>" => Symbol::A(Action::Fresh),
                    "<push>" => Symbol::A(Action::Push),
                    "<pop>" => Symbol::A(Action::Pop),
                    w => match w.strip_prefix("<define:").and_then(|r| r.strip_suffix('>')) {
                        Some(j) => Symbol::A(Action::Define(j.parse().map_err(|_| corrupt("bad define index"))?)),
                        None => Symbol::T(Atom::new(w)),
                    },
                }
            };
            if toks.get(*pos) != Some(&Tok::Close) {
                return Err(corrupt("expected `]` after leaf"));
            }
            *pos += 1;
            Ok(Tree::Leaf(sym))
        }
        "Node" => {
            let n = nt_label(g, label)?.ok_or_else(|| corrupt("node label must be a nonterminal"))?;
            let mut children = Vec::new();
            loop {
                match toks.get(*pos) {
                    Some(Tok::Close) => {
                        *pos += 1;
                        return Ok(Tree::Node(n, children));
                    }
                    Some(Tok::Open) => children.push(decode_at(g, toks, pos)?),
                    _ => return Err(corrupt("expected child or `]`")),
                }
            }
        }
        _ => Err(corrupt("expected Node or Leaf")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{load_grammar, GenerationContext};

    const PRUNE_GRAMMAR: &str = "S -> B A B @1\nA -> \"a\" @1\nB -> \"bb\" @0.5\nB -> \"bbb\" @0.5";

    fn steps_for(g: &Scfg) -> Vec<Step> {
        let ctx = GenerationContext::default();
        let pick = |head: &str, tok: &str| {
            let e = g
                .productions_for(g.nt(head).unwrap(), &ctx)
                .unwrap()
                .into_iter()
                .find(|e| e.body.iter().any(|s| *s == Symbol::terminal(tok)) || tok.is_empty())
                .unwrap();
            Step::from_expansion(&e)
        };
        vec![pick("S", ""), pick("B", "bb"), pick("A", "a"), pick("B", "bbb")]
    }

    #[test]
    fn example_tree_and_prune() {
        let g = load_grammar(PRUNE_GRAMMAR).unwrap();
        let t = build_tree(&steps_for(&g)).unwrap();
        assert_eq!(
            encode_tree(&g, &t),
            "[Node <:S:> [Node <:B:> [Leaf bb]] [Node <:A:> [Leaf a]] [Node <:B:> [Leaf bbb]]]"
        );
        let p = prune_one_level(&t).unwrap();
        assert_eq!(encode_tree(&g, &p), "[Node <:S:> [Leaf <:B:>] [Leaf <:A:>] [Leaf <:B:>]]");
        let f = frontier(&p).unwrap();
        let names: Vec<_> = f.symbols.iter().map(|s| g.symbol_text(*s)).collect();
        assert_eq!(names, ["B", "A", "B"]);
        assert_eq!(prune_one_level(&p).unwrap(), Tree::Leaf(Symbol::N(g.nt("S").unwrap())));
        assert_eq!(frontier(&t).unwrap().text().unwrap(), "bb a bbb");
    }

    #[test]
    fn incomplete_and_trailing() {
        let g = load_grammar(PRUNE_GRAMMAR).unwrap();
        let steps = steps_for(&g);
        assert_eq!(build_tree(&steps[..3]).unwrap_err(), DerivationError::IncompleteDerivation);
        assert_eq!(build_tree(&[]).unwrap_err(), DerivationError::IncompleteDerivation);
        let mut more = steps.clone();
        more.push(steps[1].clone());
        assert_eq!(build_tree(&more).unwrap_err(), DerivationError::TrailingSteps);
    }

    #[test]
    fn decode_round_trip_and_lenient_spacing() {
        let g = load_grammar(PRUNE_GRAMMAR).unwrap();
        let t = build_tree(&steps_for(&g)).unwrap();
        let enc = encode_tree(&g, &t);
        assert_eq!(decode_tree(&g, &enc).unwrap(), t);
        let tight = "[Node <:S:> [Node <:B:> [Leaf bb]] [Node <:A:> [Leaf a]] [Node<:B:>[Leaf bbb]]]";
        assert_eq!(decode_tree(&g, tight).unwrap(), t);
        assert!(decode_tree(&g, "[Node <:Q:>]").is_err());
        assert!(decode_tree(&g, "[Leaf a").is_err());
    }

    #[test]
    fn leaf_cannot_prune() {
        let g = load_grammar(PRUNE_GRAMMAR).unwrap();
        let leaf = Tree::Leaf(Symbol::N(g.start()));
        assert_eq!(prune_one_level(&leaf).unwrap_err(), DerivationError::AlreadyLeaf);
    }
}
