//! Decision procedure for ground quantifier-free formulas with equality and
//! uninterpreted symbols, plus a brute-force oracle.

mod brute;
pub mod cc;
pub mod sat;
mod smt;

pub use brute::{brute_force_oracle, OracleError};
pub use smt::{SmtLimits, SmtSolver};

use crate::fol::{Formula, Sym, Term};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// A finite set of ground quantifier-free sentences.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundProblem {
    pub sentences: Vec<Formula>,
}

impl GroundProblem {
    pub fn new(sentences: Vec<Formula>) -> GroundProblem {
        GroundProblem { sentences }
    }

    /// Every ground subterm occurring in the problem, ordered by depth and
    /// then printed form.
    pub fn universe(&self) -> Vec<Term> {
        let mut set = BTreeSet::new();
        for s in &self.sentences {
            s.visit_terms(&mut |t| t.visit_subterms(&mut |u| {
                set.insert(u.clone());
            }));
        }
        let mut v: Vec<Term> = set.into_iter().collect();
        sort_terms(&mut v);
        v
    }

    pub fn is_ground_qf(&self) -> bool {
        self.sentences.iter().all(|s| s.is_quantifier_free() && s.free_vars().is_empty())
    }
}

pub fn sort_terms(v: &mut [Term]) {
    v.sort_by_cached_key(|t| (t.depth(), t.to_string()));
}

/// A model of a ground problem: a congruence over the universe's terms,
/// relation tables over class tuples and function tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundModel {
    pub classes: Vec<Vec<Term>>,
    pub class_of: HashMap<Term, usize>,
    pub rel_table: BTreeMap<(Sym, Vec<usize>), bool>,
    pub func_table: BTreeMap<(Sym, Vec<usize>), usize>,
}

impl GroundModel {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Builds a model from a class assignment for each universe term.
    pub fn from_assignment(universe: &[Term], class: &[usize], rels: BTreeMap<(Sym, Vec<usize>), bool>) -> GroundModel {
        let n = class.iter().copied().max().map_or(0, |m| m + 1);
        let mut classes = vec![Vec::new(); n];
        let mut class_of = HashMap::new();
        for (t, &c) in universe.iter().zip(class) {
            classes[c].push(t.clone());
            class_of.insert(t.clone(), c);
        }
        let mut func_table = BTreeMap::new();
        for t in universe {
            if let Term::App(f, args) = t {
                let key = (f.clone(), args.iter().map(|a| class_of[a]).collect());
                func_table.insert(key, class_of[t]);
            }
        }
        GroundModel { classes, class_of, rel_table: rels, func_table }
    }

    /// Class of a ground term, evaluated through the constant and function
    /// tables.
    pub fn eval_term(&self, t: &Term) -> Result<usize, ModelError> {
        match t {
            Term::Var(v) => Err(ModelError::NotGround(v.to_string())),
            Term::Const(_) => self.class_of.get(t).copied().ok_or_else(|| ModelError::OutsideUniverse(t.to_string())),
            Term::App(f, args) => {
                let cs = args.iter().map(|a| self.eval_term(a)).collect::<Result<Vec<_>, _>>()?;
                self.func_table.get(&(f.clone(), cs)).copied().ok_or_else(|| ModelError::OutsideUniverse(t.to_string()))
            }
        }
    }

    /// Truth value of a ground QF sentence. Relation entries not in the
    /// table are false.
    pub fn eval(&self, f: &Formula) -> Result<bool, ModelError> {
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(r, args) => {
                let cs = args.iter().map(|a| self.eval_term(a)).collect::<Result<Vec<_>, _>>()?;
                self.rel_table.get(&(r.clone(), cs)).copied().unwrap_or(false)
            }
            Formula::Eq(a, b) => self.eval_term(a)? == self.eval_term(b)?,
            Formula::Not(g) => !self.eval(g)?,
            Formula::And(gs) => {
                for g in gs {
                    if !self.eval(g)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(gs) => {
                for g in gs {
                    if self.eval(g)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Implies(a, b) => !self.eval(a)? || self.eval(b)?,
            Formula::Iff(a, b) => self.eval(a)? == self.eval(b)?,
            Formula::Forall(..) | Formula::Exists(..) => return Err(ModelError::Quantified),
        })
    }

    /// Whether every function entry respects the congruence: each
    /// application term lives in the class its table entry names.
    pub fn is_congruent(&self) -> bool {
        self.class_of.iter().all(|(t, &c)| match t {
            Term::App(..) => self.eval_term(t).map_or(false, |d| d == c),
            _ => true,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("term {0} is outside the model's universe")]
    OutsideUniverse(String),
    #[error("variable {0} in a ground formula")]
    NotGround(String),
    #[error("quantifier in a ground formula")]
    Quantified,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Unsat,
    Sat(GroundModel),
    Resource,
}

impl Verdict {
    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsat)
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }
}

/// True iff every sentence of `p` holds in `m` and `m` is congruent.
pub fn check_model(p: &GroundProblem, m: &GroundModel) -> Result<bool, ModelError> {
    if !m.is_congruent() {
        return Ok(false);
    }
    for s in &p.sentences {
        if !m.eval(s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Decides a ground problem.
pub fn solve(p: &GroundProblem) -> Verdict {
    solve_with(p, &SmtLimits::default())
}

pub fn solve_with(p: &GroundProblem, limits: &SmtLimits) -> Verdict {
    let mut s = SmtSolver::new();
    for f in &p.sentences {
        s.add(f);
    }
    s.check(limits)
}
