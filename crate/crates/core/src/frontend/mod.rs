//! The `.bhz` modeling language: relations and program variables, axioms,
//! inits, invariants and loop-free actions over relational updates.
//!
//! ```text
//! relation req(2)
//! variable v
//! axiom  forall x. ~lt(x, x)
//! init   forall x, y. ~req(x, y)
//! invariant inv1: forall x. p(x) -> exists y. r(x, y)
//! action send(u, q) { req.insert(u, q); if ~ok(u) { abort } }
//! ```

mod desugar;
mod lexer;
mod parser;
mod printer;
mod validate;

pub use desugar::desugar;
pub use parser::{parse, parse_formula};
pub use printer::print_model;
pub use validate::{validate, Diagnostic};

use crate::fol::{Formula, Name, Sym, SymKind, Term, Vocabulary};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Reserved nullary relation set by `abort`.
pub const ERROR_REL: &str = "error";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{pos}: lexical error: {msg}")]
    Lex { pos: Pos, msg: String },
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: undeclared symbol `{name}`")]
    Undeclared { pos: Pos, name: String },
    #[error("{pos}: `{name}` expects {expected} arguments, got {got}")]
    Arity { pos: Pos, name: String, expected: usize, got: usize },
    #[error("{pos}: {msg}")]
    Declaration { pos: Pos, msg: String },
}

#[derive(Debug, Error)]
pub enum DesugarError {
    #[error("action {action}: {msg}")]
    Sugar { action: String, msg: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Command {
    Skip,
    Abort,
    /// `r(params) := body`
    Update { rel: Sym, params: Vec<Name>, body: Formula },
    Havoc(Sym),
    Assume(Formula),
    Seq(Box<Command>, Box<Command>),
    Choice(Box<Command>, Box<Command>),
    /// `local v := *`
    Local(Name),
    /// `r.insert(args | guard)`; unbound identifiers in `args` are variables.
    Insert { rel: Sym, args: Vec<Term>, guard: Formula },
    Remove { rel: Sym, args: Vec<Term>, guard: Formula },
    If { cond: Formula, then: Box<Command>, els: Option<Box<Command>> },
    Block(Vec<Command>),
}

impl Command {
    pub fn seq(cs: Vec<Command>) -> Command {
        let mut it = cs.into_iter().rev();
        let Some(mut acc) = it.next() else { return Command::Skip };
        for c in it {
            acc = Command::Seq(Box::new(c), Box::new(acc));
        }
        acc
    }

    /// True if only the seven core forms occur.
    pub fn is_core(&self) -> bool {
        match self {
            Command::Skip | Command::Abort | Command::Update { .. } | Command::Havoc(_) | Command::Assume(_) => true,
            Command::Seq(a, b) | Command::Choice(a, b) => a.is_core() && b.is_core(),
            _ => false,
        }
    }

    pub fn visit(&self, f: &mut impl FnMut(&Command)) {
        f(self);
        match self {
            Command::Seq(a, b) | Command::Choice(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Command::If { then, els, .. } => {
                then.visit(f);
                if let Some(e) = els {
                    e.visit(f);
                }
            }
            Command::Block(cs) => cs.iter().for_each(|c| c.visit(f)),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decl {
    pub label: Option<String>,
    pub formula: Formula,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    pub params: Vec<Name>,
    /// Action-scoped program variables (after desugaring this includes the
    /// parameters). They are constants of the action, not state.
    pub locals: Vec<Name>,
    pub body: Command,
    pub pos: Pos,
}

/// A relation `r(x⃗)` intended to denote `ψ(x⃗)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedRelation {
    pub rel: Sym,
    pub params: Vec<Name>,
    pub def: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramModel {
    pub vocab: Vocabulary,
    pub axioms: Vec<Decl>,
    pub inits: Vec<Decl>,
    pub invariants: Vec<Decl>,
    pub safety: Vec<Decl>,
    pub derived: Vec<DerivedRelation>,
    pub actions: Vec<Action>,
    pub desugared: bool,
}

impl ProgramModel {
    pub fn action(&self, name: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// State relations (including `error`).
    pub fn relations(&self) -> Vec<(Sym, usize)> {
        self.vocab.rels()
    }

    /// Global program variables.
    pub fn variables(&self) -> Vec<Sym> {
        self.vocab.consts()
    }

    /// The model vocabulary extended with the action's locals.
    pub fn action_vocab(&self, a: &Action) -> Vocabulary {
        let mut v = self.vocab.clone();
        for l in &a.locals {
            let _ = v.ensure(Sym { name: l.clone(), primed: false }, SymKind::Const);
        }
        v
    }

    pub fn axiom(&self) -> Formula {
        Formula::and(self.axioms.iter().map(|d| d.formula.clone()).collect())
    }

    pub fn init(&self) -> Formula {
        Formula::and(self.inits.iter().map(|d| d.formula.clone()).collect())
    }

    /// Conjunction of the invariants and safety properties together with
    /// `~error`.
    pub fn inductive_invariant(&self) -> Formula {
        let mut parts: Vec<Formula> = self.invariants.iter().map(|d| d.formula.clone()).collect();
        parts.extend(self.safety.iter().map(|d| d.formula.clone()));
        parts.push(Formula::not(Formula::Atom(Sym::new(ERROR_REL), vec![])));
        Formula::and(parts)
    }

    /// Safety conjunction φ_P = safety ∧ ¬error.
    pub fn safety_property(&self) -> Formula {
        let mut parts: Vec<Formula> = self.safety.iter().map(|d| d.formula.clone()).collect();
        parts.push(Formula::not(Formula::Atom(Sym::new(ERROR_REL), vec![])));
        Formula::and(parts)
    }
}

pub(crate) fn is_reserved_prefix(name: &str) -> bool {
    name.starts_with("sk_") || name.starts_with("inst_")
}

pub(crate) const KEYWORDS: &[&str] = &[
    "relation", "variable", "axiom", "init", "invariant", "safety", "derived", "action", "local", "assume", "if",
    "else", "skip", "abort", "forall", "exists", "true", "false",
];
