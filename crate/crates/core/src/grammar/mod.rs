//! Stochastic context-free grammar over Scheme tokens, with procedural
//! productions for integer literals, variable references and re-use of
//! earlier solutions.

mod text;
mod validate;
pub mod zeta;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use once_cell::sync::Lazy;

use crate::intern::Atom;
use crate::machine::Arity;

pub use text::{load_grammar, parse_grammar, parse_symbols, symbols_text, to_text, SHIPPED_GRAMMAR};
pub use validate::Violation;
pub use zeta::{zeta_table, ZetaTable};

/// Variables are named `var0`..`var6`.
pub const MAX_VARIABLES: usize = 7;

pub const PREVIOUS_SOLUTION: &str = "previous-solution";
pub const SOLUTION_CORPUS: &str = "solution-corpus";
pub const ABSTRACT_EXPRESSION: &str = "abstract-expression";
pub const FREQUENT_EXPRESSION: &str = "frequent-expression";
pub const HOOKS: [&str; 4] = [PREVIOUS_SOLUTION, SOLUTION_CORPUS, ABSTRACT_EXPRESSION, FREQUENT_EXPRESSION];

/// A nonterminal, by index into its grammar. Indices are never reused, so
/// they stay valid as memory updates add nonterminals.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Nt(pub u32);

/// Scope bookkeeping interleaved with the tokens of a production body.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Action {
    /// Emits the next unused variable name; the variable is not yet in scope.
    Fresh,
    /// Brings the most recent pending fresh variable into scope.
    Push,
    /// Ends the scope of the innermost bound variable (and of any solution
    /// defined after it).
    Pop,
    /// Marks solution `j` as defined and callable from here on.
    Define(u32),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Symbol {
    T(Atom),
    N(Nt),
    A(Action),
}

impl Symbol {
    pub fn terminal(s: &str) -> Symbol {
        Symbol::T(Atom::new(s))
    }

    pub fn as_nt(self) -> Option<Nt> {
        match self {
            Symbol::N(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Origin {
    Initial,
    Solution,
    Idiom,
    Mined,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Initial => "initial",
            Origin::Solution => "solution",
            Origin::Idiom => "idiom",
            Origin::Mined => "mined",
        }
    }

    pub fn from_name(s: &str) -> Option<Origin> {
        Some(match s {
            "initial" => Origin::Initial,
            "solution" => Origin::Solution,
            "idiom" => Origin::Idiom,
            "mined" => Origin::Mined,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Production {
    pub id: u32,
    pub head: Nt,
    pub body: Arc<[Symbol]>,
    pub prob: f64,
    pub origin: Origin,
    /// Set on calls to an earlier solution; offered only once it is defined.
    pub solution: Option<u32>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ProcKind {
    IntegerLiteral,
    VariableName,
    SolutionDefinition,
}

impl ProcKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcKind::IntegerLiteral => "integer-literal",
            ProcKind::VariableName => "variable-name",
            ProcKind::SolutionDefinition => "solution-definition",
        }
    }

    pub fn from_name(s: &str) -> Option<ProcKind> {
        Some(match s {
            "integer-literal" => ProcKind::IntegerLiteral,
            "variable-name" => ProcKind::VariableName,
            "solution-definition" => ProcKind::SolutionDefinition,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ProcSpec {
    pub head: Nt,
    pub kind: ProcKind,
    pub mass: f64,
}

/// A solved problem available for re-use in later programs.
#[derive(Clone, PartialEq, Debug)]
pub struct Solution {
    pub id: u32,
    pub name: Atom,
    pub arity: usize,
    /// Tokens of the solution's `define` form.
    pub tokens: Vec<Atom>,
    definition: Arc<[Symbol]>,
    reference: Arc<[Symbol]>,
}

impl Solution {
    pub fn new(id: u32, name: Atom, arity: usize, tokens: Vec<Atom>) -> Solution {
        let mut def: Vec<Symbol> = tokens.iter().map(|&t| Symbol::T(t)).collect();
        def.push(Symbol::A(Action::Define(id)));
        Solution { id, name, arity, tokens, definition: def.into(), reference: Arc::from([Symbol::T(name)]) }
    }
}

/// A name in scope during generation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Binding {
    Var(u8),
    Fn(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("all {MAX_VARIABLES} variable names are in use")]
    NamespaceExhausted,
    #[error("<push> without a pending fresh variable")]
    NothingPending,
    #[error("<pop> with no variable in scope")]
    NothingBound,
}

/// Names in scope along one derivation path.
#[derive(Clone, Default, PartialEq, Eq, Hash, Debug)]
pub struct GenerationContext {
    pub bound: Vec<Binding>,
    pub pending: Vec<u8>,
}

static VAR_NAMES: Lazy<Vec<Atom>> = Lazy::new(|| (0..MAX_VARIABLES).map(|i| Atom::new(&format!("var{i}"))).collect());
static VAR_BODIES: Lazy<Vec<Arc<[Symbol]>>> =
    Lazy::new(|| VAR_NAMES.iter().map(|&a| Arc::from([Symbol::T(a)])).collect());
static INT_BODIES: Lazy<Vec<Arc<[Symbol]>>> =
    Lazy::new(|| (1..=zeta::LITERAL_KMAX).map(|k| Arc::from([Symbol::terminal(&k.to_string())])).collect());
/// Zeta weights over variable indices (index `i` weighs `(i+1)^-2`);
/// solution names continue the sequence after the variables.
fn binding_weight(b: Binding) -> f64 {
    let rank = match b {
        Binding::Var(i) => i as f64 + 1.0,
        Binding::Fn(j) => (MAX_VARIABLES + 1) as f64 + j as f64,
    };
    rank.powi(-2)
}

pub fn variable_name(i: usize) -> Atom {
    VAR_NAMES[i]
}

impl GenerationContext {
    pub fn vars_bound(&self) -> usize {
        self.bound.iter().filter(|b| matches!(b, Binding::Var(_))).count()
    }

    pub fn is_defined(&self, solution: u32) -> bool {
        self.bound.contains(&Binding::Fn(solution))
    }

    /// Applies `action`, returning the emitted token for [`Action::Fresh`].
    pub fn apply(&mut self, action: Action) -> Result<Option<Atom>, ContextError> {
        match action {
            Action::Fresh => {
                let next = self.vars_bound() + self.pending.len();
                if next >= MAX_VARIABLES {
                    return Err(ContextError::NamespaceExhausted);
                }
                self.pending.push(next as u8);
                Ok(Some(VAR_NAMES[next]))
            }
            Action::Push => {
                let v = self.pending.pop().ok_or(ContextError::NothingPending)?;
                self.bound.push(Binding::Var(v));
                Ok(None)
            }
            Action::Pop => {
                let at =
                    self.bound.iter().rposition(|b| matches!(b, Binding::Var(_))).ok_or(ContextError::NothingBound)?;
                self.bound.truncate(at);
                Ok(None)
            }
            Action::Define(j) => {
                self.bound.push(Binding::Fn(j));
                Ok(None)
            }
        }
    }
}

/// Identity of an applied production: static productions by id, procedural
/// ones by what they generated.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum ProdKey {
    Static(u32),
    Integer(u32),
    Variable(Binding),
    SolutionDef(u32),
}

impl ProdKey {
    pub fn encode(self) -> String {
        match self {
            ProdKey::Static(id) => format!("s{id}"),
            ProdKey::Integer(k) => format!("i{k}"),
            ProdKey::Variable(Binding::Var(i)) => format!("v{i}"),
            ProdKey::Variable(Binding::Fn(j)) => format!("f{j}"),
            ProdKey::SolutionDef(j) => format!("d{j}"),
        }
    }

    pub fn decode(s: &str) -> Option<ProdKey> {
        let (tag, n) = s.split_at_checked(1)?;
        let n: u32 = n.parse().ok()?;
        Some(match tag {
            "s" => ProdKey::Static(n),
            "i" => ProdKey::Integer(n),
            "v" => ProdKey::Variable(Binding::Var(u8::try_from(n).ok()?)),
            "f" => ProdKey::Variable(Binding::Fn(n)),
            "d" => ProdKey::SolutionDef(n),
            _ => return None,
        })
    }
}

/// One alternative for expanding a nonterminal in a given context.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub key: ProdKey,
    pub head: Nt,
    pub body: Arc<[Symbol]>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrammarError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid grammar: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
    #[error("unknown nonterminal `{0}`")]
    UnknownNonTerminal(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hooks {
    pub previous_solution: Nt,
    pub solution_corpus: Nt,
    pub abstract_expression: Nt,
    pub frequent_expression: Nt,
}

impl Hooks {
    pub fn contains(&self, n: Nt) -> bool {
        [self.previous_solution, self.solution_corpus, self.abstract_expression, self.frequent_expression].contains(&n)
    }
}

#[derive(Clone, Debug)]
pub struct Scfg {
    names: Vec<String>,
    by_name: HashMap<String, Nt>,
    start: Nt,
    prods: Vec<Option<Production>>,
    by_head: Vec<Vec<u32>>,
    procs: Vec<ProcSpec>,
    solutions: Vec<Solution>,
    hooks: Hooks,
    /// Heads that may have no usable alternative in some context.
    may_vanish: Vec<bool>,
}

impl PartialEq for Scfg {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.start == other.start
            && self.prods == other.prods
            && self.procs == other.procs
            && self.solutions == other.solutions
    }
}

impl Scfg {
    /// An empty grammar with the given start symbol and the hook nonterminals.
    pub fn new(start: &str) -> Scfg {
        let mut g = Scfg {
            names: Vec::new(),
            by_name: HashMap::new(),
            start: Nt(0),
            prods: Vec::new(),
            by_head: Vec::new(),
            procs: Vec::new(),
            solutions: Vec::new(),
            hooks: Hooks {
                previous_solution: Nt(0),
                solution_corpus: Nt(0),
                abstract_expression: Nt(0),
                frequent_expression: Nt(0),
            },
            may_vanish: Vec::new(),
        };
        g.start = g.intern_nt(start);
        g.hooks = Hooks {
            previous_solution: g.intern_nt(PREVIOUS_SOLUTION),
            solution_corpus: g.intern_nt(SOLUTION_CORPUS),
            abstract_expression: g.intern_nt(ABSTRACT_EXPRESSION),
            frequent_expression: g.intern_nt(FREQUENT_EXPRESSION),
        };
        g
    }

    /// Returns the nonterminal called `name`, creating it if needed.
    pub fn intern_nt(&mut self, name: &str) -> Nt {
        if let Some(&n) = self.by_name.get(name) {
            return n;
        }
        let n = Nt(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), n);
        self.by_head.push(Vec::new());
        let hook = HOOKS.contains(&name);
        self.may_vanish.push(hook);
        n
    }

    pub fn nt(&self, name: &str) -> Option<Nt> {
        self.by_name.get(name).copied()
    }

    pub fn require_nt(&self, name: &str) -> Result<Nt, GrammarError> {
        self.nt(name).ok_or_else(|| GrammarError::UnknownNonTerminal(name.to_string()))
    }

    pub fn name(&self, n: Nt) -> &str {
        &self.names[n.0 as usize]
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = Nt> + '_ {
        (0..self.names.len() as u32).map(Nt)
    }

    pub fn start(&self) -> Nt {
        self.start
    }

    pub fn hooks(&self) -> Hooks {
        self.hooks
    }

    pub fn next_production_id(&self) -> u32 {
        self.prods.len() as u32
    }

    /// Live static productions of `head`, in id order.
    pub fn productions(&self, head: Nt) -> impl Iterator<Item = &Production> + '_ {
        self.by_head[head.0 as usize].iter().map(move |&id| self.prods[id as usize].as_ref().expect("live production"))
    }

    pub fn all_productions(&self) -> impl Iterator<Item = &Production> + '_ {
        self.prods.iter().flatten()
    }

    pub fn production(&self, id: u32) -> Option<&Production> {
        self.prods.get(id as usize).and_then(Option::as_ref)
    }

    pub fn add_production(
        &mut self,
        head: Nt,
        body: Vec<Symbol>,
        prob: f64,
        origin: Origin,
        solution: Option<u32>,
    ) -> u32 {
        let id = self.next_production_id();
        self.insert_production(Production { id, head, body: body.into(), prob, origin, solution });
        id
    }

    /// Inserts a production under its own id (used when loading saved state).
    pub(crate) fn insert_production(&mut self, p: Production) {
        let id = p.id as usize;
        if self.prods.len() <= id {
            self.prods.resize(id + 1, None);
        }
        assert!(self.prods[id].is_none(), "production id {id} reused");
        let list = &mut self.by_head[p.head.0 as usize];
        let at = list.partition_point(|&x| x < p.id);
        list.insert(at, p.id);
        self.prods[id] = Some(p);
    }

    /// Removes a production. Its id is never handed out again.
    pub fn remove_production(&mut self, id: u32) -> Option<Production> {
        let p = self.prods.get_mut(id as usize)?.take()?;
        self.by_head[p.head.0 as usize].retain(|&x| x != id);
        Some(p)
    }

    pub(crate) fn reserve_ids(&mut self, next: u32) {
        if (self.prods.len() as u32) < next {
            self.prods.resize(next as usize, None);
        }
    }

    pub fn set_prob(&mut self, id: u32, prob: f64) {
        if let Some(Some(p)) = self.prods.get_mut(id as usize) {
            p.prob = prob;
        }
    }

    pub fn add_proc(&mut self, head: Nt, kind: ProcKind, mass: f64) {
        self.procs.push(ProcSpec { head, kind, mass });
        self.may_vanish[head.0 as usize] = true;
    }

    pub fn procs(&self) -> &[ProcSpec] {
        &self.procs
    }

    pub fn procs_for(&self, head: Nt) -> impl Iterator<Item = &ProcSpec> + '_ {
        self.procs.iter().filter(move |p| p.head == head)
    }

    /// Mass reserved for procedural productions of `head`.
    pub fn proc_mass(&self, head: Nt) -> f64 {
        self.procs_for(head).map(|p| p.mass).sum()
    }

    pub fn solutions(&self) -> &[Solution] {
        &self.solutions
    }

    pub fn solution(&self, id: u32) -> Option<&Solution> {
        self.solutions.iter().find(|s| s.id == id)
    }

    pub fn add_solution(&mut self, s: Solution) {
        self.solutions.push(s);
    }

    /// Adds one production per standard procedure under `head`, each calling
    /// the procedure with a legal number of arguments, at equal probability.
    pub fn add_stdlib(&mut self, head: Nt, arg: Nt, entries: &[(String, Arity)]) {
        let share = (1.0 - self.proc_mass(head)) / entries.len() as f64;
        for (name, arity) in entries {
            let n = match arity {
                Arity::AtLeast(min) => (*min).max(2),
                other => other.min(),
            };
            let mut body = vec![Symbol::terminal("("), Symbol::terminal(name)];
            body.extend(std::iter::repeat_n(Symbol::N(arg), n));
            body.push(Symbol::terminal(")"));
            self.add_production(head, body, share, Origin::Initial, None);
        }
    }

    /// Total usable mass of `head` in `ctx`, without looking through its
    /// bodies. Zero means the head cannot be expanded here.
    fn available_mass(&self, head: Nt, ctx: &GenerationContext) -> f64 {
        let statics: f64 = self.productions(head).filter(|p| self.solution_visible(p, ctx)).map(|p| p.prob).sum();
        let procs: f64 = self
            .procs_for(head)
            .map(|spec| match spec.kind {
                ProcKind::IntegerLiteral => spec.mass,
                ProcKind::VariableName if ctx.bound.is_empty() => 0.0,
                ProcKind::VariableName => spec.mass,
                ProcKind::SolutionDefinition => {
                    let n = self.solutions.len();
                    let open = self.solutions.iter().filter(|s| !ctx.is_defined(s.id)).count();
                    if n == 0 {
                        0.0
                    } else {
                        spec.mass * open as f64 / n as f64
                    }
                }
            })
            .sum();
        statics + procs
    }

    fn solution_visible(&self, p: &Production, ctx: &GenerationContext) -> bool {
        p.solution.is_none_or(|j| ctx.is_defined(j))
    }

    fn offered(&self, p: &Production, ctx: &GenerationContext) -> bool {
        self.solution_visible(p, ctx)
            && p.body.iter().all(|s| match s {
                Symbol::N(n) if self.may_vanish[n.0 as usize] => self.available_mass(*n, ctx) > 0.0,
                _ => true,
            })
    }

    /// The alternatives for expanding `head` in `ctx`, most probable first
    /// (ties keep static-then-procedural, id order).
    ///
    /// Static alternatives that cannot be used here (a call to a solution not
    /// yet defined, or a body mentioning a nonterminal with nothing to offer)
    /// are dropped and their mass is spread proportionally over the remaining
    /// static alternatives. Solutions already defined yield zero-probability
    /// definitions, which the search skips.
    pub fn productions_for(&self, head: Nt, ctx: &GenerationContext) -> Result<Vec<Expansion>, GrammarError> {
        if head.0 as usize >= self.names.len() {
            return Err(GrammarError::UnknownNonTerminal(format!("#{}", head.0)));
        }
        let mut out = Vec::new();
        let (mut kept, mut dropped) = (0.0, 0.0);
        for p in self.productions(head) {
            if self.offered(p, ctx) {
                kept += p.prob;
                out.push(Expansion { key: ProdKey::Static(p.id), head, body: p.body.clone(), prob: p.prob });
            } else {
                dropped += p.prob;
            }
        }
        if dropped > 0.0 && kept > 0.0 {
            let scale = (kept + dropped) / kept;
            for e in &mut out {
                e.prob *= scale;
            }
        }
        for spec in self.procs_for(head) {
            self.expand_proc(spec, ctx, &mut out);
        }
        out.sort_by(|a, b| b.prob.total_cmp(&a.prob));
        Ok(out)
    }

    fn expand_proc(&self, spec: &ProcSpec, ctx: &GenerationContext, out: &mut Vec<Expansion>) {
        let head = spec.head;
        match spec.kind {
            ProcKind::IntegerLiteral => {
                for (i, p) in zeta::LITERALS.probs.iter().enumerate() {
                    out.push(Expansion {
                        key: ProdKey::Integer(i as u32 + 1),
                        head,
                        body: INT_BODIES[i].clone(),
                        prob: spec.mass * p,
                    });
                }
            }
            ProcKind::VariableName => {
                let total: f64 = ctx.bound.iter().map(|&b| binding_weight(b)).sum();
                for &b in &ctx.bound {
                    let body = match b {
                        Binding::Var(i) => VAR_BODIES[i as usize].clone(),
                        Binding::Fn(j) => match self.solution(j) {
                            Some(s) => s.reference.clone(),
                            None => continue,
                        },
                    };
                    out.push(Expansion {
                        key: ProdKey::Variable(b),
                        head,
                        body,
                        prob: spec.mass * binding_weight(b) / total,
                    });
                }
            }
            ProcKind::SolutionDefinition => {
                let n = self.solutions.len() as f64;
                for s in &self.solutions {
                    let prob = if ctx.is_defined(s.id) { 0.0 } else { spec.mass / n };
                    out.push(Expansion { key: ProdKey::SolutionDef(s.id), head, body: s.definition.clone(), prob });
                }
            }
        }
    }

    /// Resolves a recorded production identity back to an expansion, with
    /// the probability it has in this grammar and context.
    pub fn resolve(&self, head: Nt, key: ProdKey, ctx: &GenerationContext) -> Option<Expansion> {
        self.productions_for(head, ctx).ok()?.into_iter().find(|e| e.key == key)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate::validate(self)
    }

    /// Renders a symbol for diagnostics and the text format.
    pub fn symbol_text(&self, s: Symbol) -> String {
        match s {
            Symbol::T(a) => format!("{:?}", &*a.name()),
            Symbol::N(n) => self.name(n).to_string(),
            Symbol::A(a) => action_text(a),
        }
    }
}

pub fn action_text(a: Action) -> String {
    match a {
        Action::Fresh => "<fresh>".into(),
        Action::Push => "<push>".into(),
        Action::Pop => "<pop>".into(),
        Action::Define(j) => format!("<define:{j}>"),
    }
}

/// Joins Scheme tokens into readable program text.
pub fn render_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    let mut prev_open = true;
    for t in tokens {
        if !prev_open && t != ")" {
            out.push(' ');
        }
        out.push_str(t);
        prev_open = t == "(";
    }
    out
}

impl fmt::Display for Scfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::to_text(self))
    }
}
