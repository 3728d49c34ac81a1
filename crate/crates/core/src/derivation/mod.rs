//! Leftmost derivations: sentential forms, derivation trees and pruning.

mod tree;

use std::sync::Arc;

use crate::grammar::{ContextError, Expansion, GenerationContext, Nt, ProdKey, Scfg, Symbol};
use crate::intern::Atom;

pub use tree::{build_forest, build_tree, decode_tree, encode_tree, frontier, prune_one_level, Tree};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DerivationError {
    #[error("sentential form has no nonterminal left")]
    Complete,
    #[error("production for `{got}` applied where `{expected}` is leftmost")]
    HeadMismatch { expected: String, got: String },
    #[error("production has probability zero")]
    ZeroProbability,
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("derivation ends before every nonterminal is expanded")]
    IncompleteDerivation,
    #[error("derivation has steps left over after the tree is complete")]
    TrailingSteps,
    #[error("tree is a single leaf")]
    AlreadyLeaf,
    #[error("corrupt tree encoding: {0}")]
    CorruptEncoding(String),
}

/// One applied production.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub key: ProdKey,
    pub head: Nt,
    pub body: Arc<[Symbol]>,
    pub prob: f64,
}

impl Step {
    pub fn from_expansion(e: &Expansion) -> Step {
        Step { key: e.key, head: e.head, body: e.body.clone(), prob: e.prob }
    }
}

struct StepNode {
    step: Step,
    prev: Option<Arc<StepNode>>,
}

/// A left-sentential form. Actions before the leftmost nonterminal are
/// carried out eagerly, so everything left of it is a terminal.
#[derive(Clone)]
pub struct SententialForm {
    pub symbols: Vec<Symbol>,
    pub leftmost: Option<usize>,
    /// Accumulated log2 probability of the applied productions.
    pub log_prob: f64,
    pub ctx: GenerationContext,
    steps: Option<Arc<StepNode>>,
    n_steps: usize,
}

impl std::fmt::Debug for SententialForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SententialForm")
            .field("symbols", &self.symbols)
            .field("log_prob", &self.log_prob)
            .field("steps", &self.n_steps)
            .finish()
    }
}

impl SententialForm {
    /// A form with no steps applied, in an empty context.
    pub fn new(symbols: Vec<Symbol>) -> Result<SententialForm, DerivationError> {
        Self::with_context(symbols, GenerationContext::default())
    }

    pub fn with_context(symbols: Vec<Symbol>, ctx: GenerationContext) -> Result<SententialForm, DerivationError> {
        let mut form = SententialForm { symbols, leftmost: None, log_prob: 0.0, ctx, steps: None, n_steps: 0 };
        form.normalize(0)?;
        Ok(form)
    }

    pub fn start(g: &Scfg) -> SententialForm {
        Self::new(vec![Symbol::N(g.start())]).expect("a lone nonterminal needs no actions")
    }

    pub fn probability(&self) -> f64 {
        self.log_prob.exp2()
    }

    pub fn is_complete(&self) -> bool {
        self.leftmost.is_none()
    }

    pub fn leftmost_nt(&self) -> Option<Nt> {
        self.leftmost.map(|i| self.symbols[i].as_nt().expect("leftmost is a nonterminal"))
    }

    pub fn step_count(&self) -> usize {
        self.n_steps
    }

    /// Applied productions, oldest first.
    pub fn steps(&self) -> Vec<Step> {
        let mut out = Vec::with_capacity(self.n_steps);
        let mut cur = self.steps.as_deref();
        while let Some(node) = cur {
            out.push(node.step.clone());
            cur = node.prev.as_deref();
        }
        out.reverse();
        out
    }

    /// Production identities of the applied steps, oldest first.
    pub fn trace(&self) -> Vec<ProdKey> {
        let mut out = Vec::with_capacity(self.n_steps);
        let mut cur = self.steps.as_deref();
        while let Some(node) = cur {
            out.push(node.step.key);
            cur = node.prev.as_deref();
        }
        out.reverse();
        out
    }

    /// Nonterminals of the form in order; a complete derivation from this
    /// form yields one tree per entry.
    pub fn nonterminals(&self) -> Vec<Nt> {
        self.symbols.iter().filter_map(|s| s.as_nt()).collect()
    }

    /// Terminal tokens, once the form is complete.
    pub fn tokens(&self) -> Option<Vec<Atom>> {
        if !self.is_complete() {
            return None;
        }
        Some(
            self.symbols
                .iter()
                .filter_map(|s| match s {
                    Symbol::T(a) => Some(*a),
                    _ => None,
                })
                .collect(),
        )
    }

    /// Program text of a complete form.
    pub fn text(&self) -> Option<String> {
        let tokens = self.tokens()?;
        let names: Vec<_> = tokens.iter().map(|t| t.name()).collect();
        Some(crate::grammar::render_tokens(names.iter().map(|s| &**s)))
    }

    /// Carries out actions from `from` up to the next nonterminal.
    fn normalize(&mut self, from: usize) -> Result<(), ContextError> {
        let mut i = from;
        let mut out_at = from;
        // Compact in place: actions either become terminals or disappear.
        while i < self.symbols.len() {
            match self.symbols[i] {
                Symbol::T(_) => {
                    self.symbols[out_at] = self.symbols[i];
                    out_at += 1;
                    i += 1;
                }
                Symbol::A(a) => {
                    if let Some(tok) = self.ctx.apply(a)? {
                        self.symbols[out_at] = Symbol::T(tok);
                        out_at += 1;
                    }
                    i += 1;
                }
                Symbol::N(_) => break,
            }
        }
        self.symbols.drain(out_at..i);
        self.leftmost = (out_at < self.symbols.len()).then_some(out_at);
        Ok(())
    }

    /// Replaces the leftmost nonterminal by the body of `e`.
    pub fn expand_leftmost(&self, e: &Expansion) -> Result<SententialForm, DerivationError> {
        let at = self.leftmost.ok_or(DerivationError::Complete)?;
        let lhs = self.symbols[at].as_nt().expect("leftmost is a nonterminal");
        if lhs != e.head {
            return Err(DerivationError::HeadMismatch {
                expected: format!("#{}", lhs.0),
                got: format!("#{}", e.head.0),
            });
        }
        if e.prob <= 0.0 || e.prob.is_nan() {
            return Err(DerivationError::ZeroProbability);
        }
        let mut symbols = Vec::with_capacity(self.symbols.len() + e.body.len());
        symbols.extend_from_slice(&self.symbols[..at]);
        symbols.extend_from_slice(&e.body);
        symbols.extend_from_slice(&self.symbols[at + 1..]);
        let mut next = SententialForm {
            symbols,
            leftmost: None,
            log_prob: self.log_prob + e.prob.log2(),
            ctx: self.ctx.clone(),
            steps: Some(Arc::new(StepNode { step: Step::from_expansion(e), prev: self.steps.clone() })),
            n_steps: self.n_steps + 1,
        };
        next.normalize(at)?;
        Ok(next)
    }

    /// Alternatives for the leftmost nonterminal in this form's context.
    pub fn alternatives(&self, g: &Scfg) -> Vec<Expansion> {
        match self.leftmost_nt() {
            Some(n) => g.productions_for(n, &self.ctx).expect("nonterminal of this grammar"),
            None => Vec::new(),
        }
    }
}

/// Replays recorded production identities from `form`, re-resolving each
/// against `g`. Returns `None` if some step no longer resolves.
pub fn replay(g: &Scfg, form: &SententialForm, trace: &[ProdKey]) -> Option<SententialForm> {
    let mut cur = form.clone();
    for &key in trace {
        let head = cur.leftmost_nt()?;
        let e = g.resolve(head, key, &cur.ctx)?;
        cur = cur.expand_leftmost(&e).ok()?;
    }
    Some(cur)
}
