//! Bounded-depth Herbrand terms and the bound-k instantiation of
//! Skolemized verification conditions.

mod clause;
mod engine;
mod export;

pub use clause::{clausify, guard_encode, Clause};
pub use engine::{solve_bounded, BoundedOutcome, EngineStats, HorizonOptions};
pub use export::to_smtlib;

use crate::fol::{Formula, Name, Sym, SymKind, Term, Vocabulary};
use crate::vcgen::VerificationCondition;
use itertools::Itertools;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Name of the constant added when a vocabulary has none.
pub const HERBRAND_CONST: &str = "sk_herbrand";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HorizonError {
    #[error("expected {expected} terms, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("formula is not universal")]
    NotUniversal,
    #[error("instance limit of {0} exceeded")]
    Limit(usize),
    #[error("the guard encoding is only defined for bound 1")]
    GuardBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Encoding {
    /// Every instance of depth at most k.
    Enumerate,
    /// The under-approximation where universals over function-bearing
    /// bodies range over T_{k-1}.
    Approx,
    /// Bound 1 via guarded universals.
    Guard,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Enumerate => "enumerate",
            Encoding::Approx => "approx",
            Encoding::Guard => "guard",
        })
    }
}

impl FromStr for Encoding {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "enumerate" | "exact" => Ok(Encoding::Enumerate),
            "approx" => Ok(Encoding::Approx),
            "guard" => Ok(Encoding::Guard),
            _ => Err(format!("unknown encoding `{s}`")),
        }
    }
}

/// T_0 ⊆ T_1 ⊆ … ⊆ T_k. `levels[i]` holds all of T_i, ordered by depth
/// then printed form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermBank {
    pub levels: Vec<Vec<Term>>,
    /// Set when the vocabulary had no constants.
    pub fresh: Option<Sym>,
}

impl TermBank {
    pub fn level(&self, i: usize) -> &[Term] {
        &self.levels[i.min(self.levels.len() - 1)]
    }

    pub fn bound(&self) -> usize {
        self.levels.len() - 1
    }
}

fn sorted(set: BTreeSet<Term>) -> Vec<Term> {
    let mut v: Vec<Term> = set.into_iter().collect();
    crate::solver::sort_terms(&mut v);
    v
}

/// The constants of the vocabulary (C), or one fresh constant if none.
fn base_constants(vocab: &Vocabulary) -> (Vec<Sym>, Option<Sym>) {
    let cs = vocab.consts();
    if cs.is_empty() {
        let s = Sym::new(HERBRAND_CONST);
        (vec![s.clone()], Some(s))
    } else {
        (cs, None)
    }
}

pub(crate) fn constants(vc: &VerificationCondition) -> Vec<Sym> {
    base_constants(&vc.vocab).0
}

pub fn terms_up_to(vocab: &Vocabulary, k: usize) -> TermBank {
    let (cs, fresh) = base_constants(vocab);
    let funcs = vocab.funcs();
    let mut cur: BTreeSet<Term> = cs.into_iter().map(Term::Const).collect();
    let mut levels = vec![sorted(cur.clone())];
    for _ in 0..k {
        let prev: Vec<Term> = levels.last().unwrap().clone();
        for (f, a) in &funcs {
            for args in (0..*a).map(|_| prev.iter().cloned()).multi_cartesian_product() {
                cur.insert(Term::App(f.clone(), args));
            }
        }
        levels.push(sorted(cur.clone()));
    }
    TermBank { levels, fresh }
}

/// Substitutes `terms` for the free variables (sorted by name) and then
/// the leading universal block of `phi`.
pub fn instantiate(phi: &Formula, terms: &[Term]) -> Result<Formula, HorizonError> {
    let mut vars: Vec<Name> = phi.free_vars().into_iter().collect();
    let body = match phi {
        Formula::Forall(vs, b) => {
            vars.extend(vs.iter().cloned());
            (**b).clone()
        }
        f => f.clone(),
    };
    if !body.is_quantifier_free() {
        return Err(HorizonError::NotUniversal);
    }
    if vars.len() != terms.len() {
        return Err(HorizonError::Arity { expected: vars.len(), got: terms.len() });
    }
    let map: BTreeMap<Name, Term> = vars.into_iter().zip(terms.iter().cloned()).collect();
    Ok(crate::fol::substitute(&body, &map))
}

/// The level T_b each variable of `c` ranges over, or `None` if the clause
/// has no instances at this bound.
pub fn var_levels(c: &Clause, k: usize, enc: Encoding) -> Option<Vec<usize>> {
    c.vars
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let d = c.depth[i];
            match enc {
                Encoding::Enumerate => k.checked_sub(d),
                Encoding::Approx if c.restricted[i] => k.checked_sub(d.max(1)),
                Encoding::Approx => k.checked_sub(d),
                Encoding::Guard => Some(1),
            }
        })
        .collect()
}

/// Prepares a VC for an encoding: guard-encodes if needed and clausifies.
pub fn prepare(vc: &VerificationCondition, k: usize, enc: Encoding) -> Result<Vec<Clause>, HorizonError> {
    match enc {
        Encoding::Guard if k != 1 => Err(HorizonError::GuardBound),
        Encoding::Guard => Ok(clausify(&guard_encode(vc))),
        _ => Ok(clausify(vc)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub clause: usize,
    pub tuple: Vec<Term>,
    pub sentence: Formula,
}

/// A deduplicated set of ground instances of a VC.
#[derive(Clone, Debug)]
pub struct InstantiationSet {
    pub bound: usize,
    pub encoding: Encoding,
    pub instances: Vec<Instance>,
}

impl InstantiationSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn sentences(&self) -> Vec<Formula> {
        self.instances.iter().map(|i| i.sentence.clone()).collect()
    }

    pub fn sentence_set(&self) -> HashSet<Formula> {
        self.instances.iter().map(|i| i.sentence.clone()).collect()
    }
}

fn build_set(
    vc: &VerificationCondition,
    k: usize,
    enc: Encoding,
    limit: usize,
) -> Result<InstantiationSet, HorizonError> {
    let clauses = prepare(vc, k, enc)?;
    let bank = terms_up_to(&vc.vocab, k.max(1));
    let mut seen = HashSet::new();
    let mut instances = Vec::new();
    for (ci, c) in clauses.iter().enumerate() {
        if c.vars.is_empty() {
            if seen.insert(c.matrix.clone()) {
                instances.push(Instance { clause: ci, tuple: vec![], sentence: c.matrix.clone() });
            }
            continue;
        }
        let Some(levels) = var_levels(c, k, enc) else { continue };
        let doms: Vec<&[Term]> = levels.iter().map(|&b| bank.level(b)).collect();
        for tuple in doms.iter().map(|d| d.iter().cloned()).multi_cartesian_product() {
            let s = c.instance(&tuple);
            if seen.insert(s.clone()) {
                if instances.len() >= limit {
                    return Err(HorizonError::Limit(limit));
                }
                instances.push(Instance { clause: ci, tuple, sentence: s });
            }
        }
    }
    Ok(InstantiationSet { bound: k, encoding: enc, instances })
}

/// Every instance of depth at most k.
pub fn bounded_instantiation_set(vc: &VerificationCondition, k: usize, limit: usize) -> Result<InstantiationSet, HorizonError> {
    build_set(vc, k, Encoding::Enumerate, limit)
}

/// The under-approximating set: universals whose body has a function
/// application range over T_{k-1}.
pub fn approx_instantiation_set(vc: &VerificationCondition, k: usize, limit: usize) -> Result<InstantiationSet, HorizonError> {
    build_set(vc, k, Encoding::Approx, limit)
}

/// Instances under the guard encoding (bound 1).
pub fn guard_instantiation_set(vc: &VerificationCondition, limit: usize) -> Result<InstantiationSet, HorizonError> {
    build_set(vc, 1, Encoding::Guard, limit)
}

/// Symbols a ground problem built from `vc` may mention beyond its vocabulary.
pub fn problem_vocab(vc: &VerificationCondition, clauses: &[Clause]) -> Vocabulary {
    let mut v = vc.vocab.clone();
    if let (_, Some(s)) = base_constants(&vc.vocab) {
        let _ = v.ensure(s, SymKind::Const);
    }
    for c in clauses {
        for r in c.matrix.rels() {
            if v.get(&r).is_none() {
                let arity = arity_of(&c.matrix, &r);
                let _ = v.ensure(r, SymKind::Rel(arity));
            }
        }
    }
    v
}

fn arity_of(f: &Formula, r: &Sym) -> usize {
    let mut n = 0;
    f.visit_atoms(&mut |a| {
        if let crate::fol::AtomRef::Rel(s, args) = a {
            if s == r {
                n = args.len();
            }
        }
    });
    n
}
