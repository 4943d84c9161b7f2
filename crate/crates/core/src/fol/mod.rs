//! Single-sorted first-order logic with equality.
//!
//! Terms and formulas are immutable values. Symbols are referenced by name
//! together with a primed flag; their kinds live in a [`Vocabulary`].

mod classify;
mod eval;
mod print;
mod transform;

pub use classify::{classify, is_af, is_ae, is_epr, is_existential, is_one_alternation, is_universal, QuantClass};
pub use eval::{EvalError, Structure};
pub(crate) use transform::{all_vars, fresh_name};
pub use transform::{
    nnf, pnf, prime, rename_apart, skolemize, substitute, substitute_relation, unprime, SkolemCtx, SkolemOrigin,
};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FolError {
    #[error("duplicate symbol {0}")]
    Duplicate(String),
    #[error("undeclared symbol {0}")]
    Undeclared(String),
    #[error("arity mismatch for {sym}: expected {expected}, got {got}")]
    Arity { sym: String, expected: usize, got: usize },
    #[error("{0} is not a relation")]
    NotRelation(String),
    #[error("{0} is not a function")]
    NotFunction(String),
    #[error("{0} is not a constant")]
    NotConstant(String),
    #[error("symbol {0} is already primed")]
    AlreadyPrimed(String),
    #[error("symbol {0} is not primed")]
    NotPrimed(String),
    #[error("invalid arity for {0}")]
    BadArity(String),
}

/// A reference to a vocabulary symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sym {
    pub name: Name,
    pub primed: bool,
}

impl Sym {
    pub fn new(name: &str) -> Sym {
        Sym { name: Arc::from(name), primed: false }
    }

    pub fn primed(name: &str) -> Sym {
        Sym { name: Arc::from(name), primed: true }
    }

    pub fn to_primed(&self) -> Sym {
        Sym { name: self.name.clone(), primed: true }
    }

    pub fn to_unprimed(&self) -> Sym {
        Sym { name: self.name.clone(), primed: false }
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.primed {
            write!(f, "{}'", self.name)
        } else {
            write!(f, "{}", self.name)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymKind {
    Const,
    Rel(usize),
    Func(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub sym: Sym,
    pub kind: SymKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    syms: BTreeMap<Sym, SymKind>,
}

impl Vocabulary {
    pub fn new() -> Vocabulary {
        Vocabulary::default()
    }

    pub fn add(&mut self, sym: Sym, kind: SymKind) -> Result<(), FolError> {
        if let SymKind::Func(0) = kind {
            return Err(FolError::BadArity(sym.to_string()));
        }
        if self.syms.contains_key(&sym) {
            return Err(FolError::Duplicate(sym.to_string()));
        }
        self.syms.insert(sym, kind);
        Ok(())
    }

    /// Adds the symbol unless an identical declaration already exists.
    pub fn ensure(&mut self, sym: Sym, kind: SymKind) -> Result<(), FolError> {
        match self.syms.get(&sym) {
            Some(k) if *k == kind => Ok(()),
            Some(_) => Err(FolError::Duplicate(sym.to_string())),
            None => self.add(sym, kind),
        }
    }

    pub fn get(&self, sym: &Sym) -> Option<SymKind> {
        self.syms.get(sym).copied()
    }

    pub fn contains(&self, sym: &Sym) -> bool {
        self.syms.contains_key(sym)
    }

    pub fn remove(&mut self, sym: &Sym) {
        self.syms.remove(sym);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, SymKind)> {
        self.syms.iter().map(|(s, k)| (s, *k))
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        self.iter().map(|(s, k)| Symbol { sym: s.clone(), kind: k }).collect()
    }

    pub fn consts(&self) -> Vec<Sym> {
        self.iter().filter(|(_, k)| *k == SymKind::Const).map(|(s, _)| s.clone()).collect()
    }

    pub fn rels(&self) -> Vec<(Sym, usize)> {
        self.iter()
            .filter_map(|(s, k)| match k {
                SymKind::Rel(a) => Some((s.clone(), a)),
                _ => None,
            })
            .collect()
    }

    pub fn funcs(&self) -> Vec<(Sym, usize)> {
        self.iter()
            .filter_map(|(s, k)| match k {
                SymKind::Func(a) => Some((s.clone(), a)),
                _ => None,
            })
            .collect()
    }

    pub fn is_relational(&self) -> bool {
        self.syms.values().all(|k| !matches!(k, SymKind::Func(_)))
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syms.is_empty()
    }

    /// Union of two vocabularies; conflicting kinds are an error.
    pub fn union(&self, other: &Vocabulary) -> Result<Vocabulary, FolError> {
        let mut out = self.clone();
        for (s, k) in other.iter() {
            out.ensure(s.clone(), k)?;
        }
        Ok(out)
    }

    /// The primed copy of every unprimed constant and relation.
    pub fn primed_copy(&self) -> Vocabulary {
        let mut out = Vocabulary::new();
        for (s, k) in self.iter() {
            if !s.primed && !matches!(k, SymKind::Func(_)) {
                out.syms.insert(s.to_primed(), k);
            }
        }
        out
    }

    /// Checks arities and declarations of every symbol in `f`.
    pub fn check_formula(&self, f: &Formula) -> Result<(), FolError> {
        let mut err = Ok(());
        f.visit_atoms(&mut |a| {
            if err.is_err() {
                return;
            }
            err = match a {
                AtomRef::Rel(r, args) => self.check_rel(r, args.len()).and_then(|_| {
                    args.iter().try_for_each(|t| self.check_term(t))
                }),
                AtomRef::Eq(l, r) => self.check_term(l).and_then(|_| self.check_term(r)),
            };
        });
        err
    }

    fn check_rel(&self, r: &Sym, n: usize) -> Result<(), FolError> {
        match self.get(r) {
            Some(SymKind::Rel(a)) if a == n => Ok(()),
            Some(SymKind::Rel(a)) => Err(FolError::Arity { sym: r.to_string(), expected: a, got: n }),
            Some(_) => Err(FolError::NotRelation(r.to_string())),
            None => Err(FolError::Undeclared(r.to_string())),
        }
    }

    pub fn check_term(&self, t: &Term) -> Result<(), FolError> {
        match t {
            Term::Var(_) => Ok(()),
            Term::Const(c) => match self.get(c) {
                Some(SymKind::Const) => Ok(()),
                Some(_) => Err(FolError::NotConstant(c.to_string())),
                None => Err(FolError::Undeclared(c.to_string())),
            },
            Term::App(f, args) => {
                match self.get(f) {
                    Some(SymKind::Func(a)) if a == args.len() => {}
                    Some(SymKind::Func(a)) => {
                        return Err(FolError::Arity { sym: f.to_string(), expected: a, got: args.len() })
                    }
                    Some(_) => return Err(FolError::NotFunction(f.to_string())),
                    None => return Err(FolError::Undeclared(f.to_string())),
                }
                args.iter().try_for_each(|t| self.check_term(t))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var(Name),
    Const(Sym),
    App(Sym, Vec<Term>),
}

impl Term {
    pub fn var(n: &str) -> Term {
        Term::Var(Arc::from(n))
    }

    pub fn cst(n: &str) -> Term {
        Term::Const(Sym::new(n))
    }

    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(Sym::new(f), args)
    }

    /// Function nesting depth; constants and variables have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) => 0,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) => true,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn free_vars_into(&self, out: &mut BTreeSet<Name>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.free_vars_into(out)),
        }
    }

    pub fn has_var(&self, v: &str) -> bool {
        match self {
            Term::Var(x) => &**x == v,
            Term::Const(_) => false,
            Term::App(_, args) => args.iter().any(|a| a.has_var(v)),
        }
    }

    pub fn subst(&self, map: &BTreeMap<Name, Term>) -> Term {
        match self {
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Const(_) => self.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.subst(map)).collect()),
        }
    }

    /// Replaces the constant `c` by `t`.
    pub fn replace_const(&self, c: &Sym, t: &Term) -> Term {
        match self {
            Term::Const(d) if d == c => t.clone(),
            Term::Var(_) | Term::Const(_) => self.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.replace_const(c, t)).collect()),
        }
    }

    pub fn map_syms(&self, m: &mut impl FnMut(&Sym) -> Sym) -> Term {
        match self {
            Term::Var(_) => self.clone(),
            Term::Const(c) => Term::Const(m(c)),
            Term::App(f, args) => Term::App(m(f), args.iter().map(|a| a.map_syms(m)).collect()),
        }
    }

    pub fn consts_into(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Term::Var(_) => {}
            Term::Const(c) => {
                out.insert(c.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.consts_into(out)),
        }
    }

    pub fn funcs_into(&self, out: &mut BTreeSet<Sym>) {
        if let Term::App(f, args) = self {
            out.insert(f.clone());
            args.iter().for_each(|a| a.funcs_into(out));
        }
    }

    /// Calls `f` on every subterm, children first.
    pub fn visit_subterms(&self, f: &mut impl FnMut(&Term)) {
        if let Term::App(_, args) = self {
            for a in args {
                a.visit_subterms(f);
            }
        }
        f(self);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formula {
    True,
    False,
    Atom(Sym, Vec<Term>),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(Vec<Name>, Box<Formula>),
    Exists(Vec<Name>, Box<Formula>),
}

pub enum AtomRef<'a> {
    Rel(&'a Sym, &'a [Term]),
    Eq(&'a Term, &'a Term),
}

impl Formula {
    pub fn atom(r: &str, args: Vec<Term>) -> Formula {
        Formula::Atom(Sym::new(r), args)
    }

    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Eq(a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(g) => *g,
            g => Formula::Not(Box::new(g)),
        }
    }

    /// Conjunction with flattening and unit simplification.
    pub fn and(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(gs) => out.extend(gs),
                g => out.push(g),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(gs) => out.extend(gs),
                g => out.push(g),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn forall(vars: Vec<Name>, body: Formula) -> Formula {
        if vars.is_empty() {
            return body;
        }
        match body {
            Formula::Forall(mut inner, b) => {
                let mut vs = vars;
                vs.append(&mut inner);
                Formula::Forall(vs, b)
            }
            b => Formula::Forall(vars, Box::new(b)),
        }
    }

    pub fn exists(vars: Vec<Name>, body: Formula) -> Formula {
        if vars.is_empty() {
            return body;
        }
        match body {
            Formula::Exists(mut inner, b) => {
                let mut vs = vars;
                vs.append(&mut inner);
                Formula::Exists(vs, b)
            }
            b => Formula::Exists(vars, Box::new(b)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.free_vars_rec(&mut Vec::new(), &mut out);
        out
    }

    fn free_vars_rec(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        let add = |t: &Term, bound: &Vec<Name>, out: &mut BTreeSet<Name>| {
            let mut vs = BTreeSet::new();
            t.free_vars_into(&mut vs);
            for v in vs {
                if !bound.contains(&v) {
                    out.insert(v);
                }
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(_, args) => args.iter().for_each(|t| add(t, bound, out)),
            Formula::Eq(a, b) => {
                add(a, bound, out);
                add(b, bound, out);
            }
            Formula::Not(f) => f.free_vars_rec(bound, out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.free_vars_rec(bound, out)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.free_vars_rec(bound, out);
                b.free_vars_rec(bound, out);
            }
            Formula::Forall(vs, f) | Formula::Exists(vs, f) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                f.free_vars_rec(bound, out);
                bound.truncate(n);
            }
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) | Formula::Eq(..) => true,
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(Formula::is_quantifier_free),
            Formula::Implies(a, b) | Formula::Iff(a, b) => a.is_quantifier_free() && b.is_quantifier_free(),
            Formula::Forall(..) | Formula::Exists(..) => false,
        }
    }

    pub fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(AtomRef<'a>)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(r, args) => f(AtomRef::Rel(r, args)),
            Formula::Eq(a, b) => f(AtomRef::Eq(a, b)),
            Formula::Not(g) | Formula::Forall(_, g) | Formula::Exists(_, g) => g.visit_atoms(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.visit_atoms(f)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }

    pub fn visit_terms<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        self.visit_atoms(&mut |a| match a {
            AtomRef::Rel(_, args) => args.iter().for_each(&mut *f),
            AtomRef::Eq(l, r) => {
                f(l);
                f(r)
            }
        });
    }

    /// Constant symbols occurring in the formula.
    pub fn consts(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| t.consts_into(&mut out));
        out
    }

    pub fn funcs(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| t.funcs_into(&mut out));
        out
    }

    pub fn rels(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            if let AtomRef::Rel(r, _) = a {
                out.insert(r.clone());
            }
        });
        out
    }

    pub fn has_function_app(&self) -> bool {
        let mut found = false;
        self.visit_terms(&mut |t| {
            if t.depth() > 0 {
                found = true
            }
        });
        found
    }

    /// Maximal function nesting depth of any term.
    pub fn term_depth(&self) -> usize {
        let mut d = 0;
        self.visit_terms(&mut |t| d = d.max(t.depth()));
        d
    }

    /// Structural map over atoms; quantifier binders are left untouched.
    pub fn map_atoms(&self, f: &mut impl FnMut(&Formula) -> Formula) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom(..) | Formula::Eq(..) => f(self),
            Formula::Not(g) => Formula::Not(Box::new(g.map_atoms(f))),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| g.map_atoms(f)).collect()),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| g.map_atoms(f)).collect()),
            Formula::Implies(a, b) => Formula::Implies(Box::new(a.map_atoms(f)), Box::new(b.map_atoms(f))),
            Formula::Iff(a, b) => Formula::Iff(Box::new(a.map_atoms(f)), Box::new(b.map_atoms(f))),
            Formula::Forall(vs, g) => Formula::Forall(vs.clone(), Box::new(g.map_atoms(f))),
            Formula::Exists(vs, g) => Formula::Exists(vs.clone(), Box::new(g.map_atoms(f))),
        }
    }

    /// Renames symbols in atoms and terms.
    pub fn map_syms(&self, m: &mut impl FnMut(&Sym) -> Sym) -> Formula {
        self.map_atoms(&mut |a| match a {
            Formula::Atom(r, args) => Formula::Atom(m(r), args.iter().map(|t| t.map_syms(m)).collect()),
            Formula::Eq(l, r) => Formula::Eq(l.map_syms(m), r.map_syms(m)),
            _ => unreachable!(),
        })
    }

    /// Replaces the constant `c` by the term `t`. `t` must not contain
    /// variables bound inside the formula.
    pub fn replace_const(&self, c: &Sym, t: &Term) -> Formula {
        self.map_atoms(&mut |a| match a {
            Formula::Atom(r, args) => Formula::Atom(r.clone(), args.iter().map(|x| x.replace_const(c, t)).collect()),
            Formula::Eq(l, r) => Formula::Eq(l.replace_const(c, t), r.replace_const(c, t)),
            _ => unreachable!(),
        })
    }

    /// Number of quantifier-bound variables.
    pub fn quantifier_count(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) | Formula::Eq(..) => 0,
            Formula::Not(f) => f.quantifier_count(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(Formula::quantifier_count).sum(),
            Formula::Implies(a, b) | Formula::Iff(a, b) => a.quantifier_count() + b.quantifier_count(),
            Formula::Forall(vs, f) | Formula::Exists(vs, f) => vs.len() + f.quantifier_count(),
        }
    }

    pub fn conjuncts(&self) -> Vec<Formula> {
        match self {
            Formula::And(fs) => fs.iter().flat_map(Formula::conjuncts).collect(),
            Formula::True => vec![],
            f => vec![f.clone()],
        }
    }
}
