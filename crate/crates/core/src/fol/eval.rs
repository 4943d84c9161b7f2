use super::{Formula, Name, Sym, SymKind, Term, Vocabulary};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("symbol {0} has no interpretation")]
    Uninterpreted(String),
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("arity mismatch for {0}")]
    Arity(String),
    #[error("element {0} outside the domain")]
    OutOfDomain(usize),
}

/// A finite structure with domain `{0, .., size-1}`. Tables are dense and
/// indexed by the argument tuple read as a base-`size` number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Structure {
    pub size: usize,
    pub consts: BTreeMap<Sym, usize>,
    pub rels: BTreeMap<Sym, (usize, Vec<bool>)>,
    pub funcs: BTreeMap<Sym, (usize, Vec<usize>)>,
}

fn index(size: usize, args: &[usize]) -> usize {
    args.iter().fold(0, |acc, a| acc * size + a)
}

impl Structure {
    /// Structure where every relation is empty and every constant and
    /// function maps to element 0.
    pub fn empty(vocab: &Vocabulary, size: usize) -> Structure {
        assert!(size > 0, "domain must be nonempty");
        let mut s = Structure { size, consts: BTreeMap::new(), rels: BTreeMap::new(), funcs: BTreeMap::new() };
        for (sym, kind) in vocab.iter() {
            match kind {
                SymKind::Const => {
                    s.consts.insert(sym.clone(), 0);
                }
                SymKind::Rel(a) => {
                    s.rels.insert(sym.clone(), (a, vec![false; size.pow(a as u32)]));
                }
                SymKind::Func(a) => {
                    s.funcs.insert(sym.clone(), (a, vec![0; size.pow(a as u32)]));
                }
            }
        }
        s
    }

    /// Radix of every free choice in a structure over `vocab` of this size,
    /// in the order used by [`Structure::from_digits`].
    pub fn radices(vocab: &Vocabulary, size: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (_, kind) in vocab.iter() {
            match kind {
                SymKind::Const => out.push(size),
                SymKind::Rel(a) => out.extend(std::iter::repeat(2).take(size.pow(a as u32))),
                SymKind::Func(a) => out.extend(std::iter::repeat(size).take(size.pow(a as u32))),
            }
        }
        out
    }

    pub fn from_digits(vocab: &Vocabulary, size: usize, digits: &[usize]) -> Structure {
        let mut s = Structure::empty(vocab, size);
        let mut it = digits.iter().copied();
        for (sym, kind) in vocab.iter() {
            match kind {
                SymKind::Const => {
                    s.consts.insert(sym.clone(), it.next().unwrap());
                }
                SymKind::Rel(_) => {
                    let tbl = &mut s.rels.get_mut(sym).unwrap().1;
                    for b in tbl.iter_mut() {
                        *b = it.next().unwrap() == 1;
                    }
                }
                SymKind::Func(_) => {
                    let tbl = &mut s.funcs.get_mut(sym).unwrap().1;
                    for b in tbl.iter_mut() {
                        *b = it.next().unwrap();
                    }
                }
            }
        }
        s
    }

    /// Every structure over `vocab` with the given domain size.
    pub fn enumerate(vocab: &Vocabulary, size: usize) -> impl Iterator<Item = Structure> + '_ {
        let radices = Structure::radices(vocab, size);
        let mut digits = vec![0usize; radices.len()];
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let s = Structure::from_digits(vocab, size, &digits);
            done = true;
            for i in 0..digits.len() {
                digits[i] += 1;
                if digits[i] < radices[i] {
                    done = false;
                    break;
                }
                digits[i] = 0;
            }
            Some(s)
        })
    }

    /// Number of structures [`Structure::enumerate`] yields, saturating.
    pub fn count(vocab: &Vocabulary, size: usize) -> u128 {
        Structure::radices(vocab, size).iter().fold(1u128, |acc, r| acc.saturating_mul(*r as u128))
    }

    /// A structure whose choices are drawn from `pick(radix)`.
    pub fn random_with(vocab: &Vocabulary, size: usize, pick: &mut impl FnMut(usize) -> usize) -> Structure {
        let digits: Vec<usize> = Structure::radices(vocab, size).into_iter().map(|r| pick(r) % r).collect();
        Structure::from_digits(vocab, size, &digits)
    }

    pub fn rel(&self, r: &Sym, args: &[usize]) -> Result<bool, EvalError> {
        let (a, tbl) = self.rels.get(r).ok_or_else(|| EvalError::Uninterpreted(r.to_string()))?;
        if *a != args.len() {
            return Err(EvalError::Arity(r.to_string()));
        }
        if let Some(&e) = args.iter().find(|&&e| e >= self.size) {
            return Err(EvalError::OutOfDomain(e));
        }
        Ok(tbl[index(self.size, args)])
    }

    pub fn set_rel(&mut self, r: &Sym, args: &[usize], v: bool) {
        let size = self.size;
        let (_, tbl) = self.rels.get_mut(r).expect("relation");
        tbl[index(size, args)] = v;
    }

    pub fn set_func(&mut self, f: &Sym, args: &[usize], v: usize) {
        let size = self.size;
        let (_, tbl) = self.funcs.get_mut(f).expect("function");
        tbl[index(size, args)] = v;
    }

    /// Interprets relation `r` as the formula `psi` over `params`.
    pub fn define_relation(&mut self, r: &Sym, params: &[Name], psi: &Formula) -> Result<(), EvalError> {
        let a = params.len();
        let mut tbl = vec![false; self.size.pow(a as u32)];
        let mut env: Vec<(Name, usize)> = Vec::new();
        for (i, slot) in tbl.iter_mut().enumerate() {
            env.clear();
            let mut rem = i;
            let mut vals = vec![0; a];
            for j in (0..a).rev() {
                vals[j] = rem % self.size;
                rem /= self.size;
            }
            for (p, v) in params.iter().zip(vals) {
                env.push((p.clone(), v));
            }
            *slot = self.eval_in(psi, &mut env)?;
        }
        self.rels.insert(r.clone(), (a, tbl));
        Ok(())
    }

    pub fn term(&self, t: &Term, env: &[(Name, usize)]) -> Result<usize, EvalError> {
        match t {
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|(_, e)| *e)
                .ok_or_else(|| EvalError::Unbound(v.to_string())),
            Term::Const(c) => self.consts.get(c).copied().ok_or_else(|| EvalError::Uninterpreted(c.to_string())),
            Term::App(f, args) => {
                let (a, tbl) = self.funcs.get(f).ok_or_else(|| EvalError::Uninterpreted(f.to_string()))?;
                if *a != args.len() {
                    return Err(EvalError::Arity(f.to_string()));
                }
                let mut idx = 0;
                for x in args {
                    idx = idx * self.size + self.term(x, env)?;
                }
                Ok(tbl[idx])
            }
        }
    }

    /// Evaluates a sentence.
    pub fn eval(&self, f: &Formula) -> Result<bool, EvalError> {
        self.eval_in(f, &mut Vec::new())
    }

    /// Evaluates under a variable assignment; later entries shadow earlier.
    pub fn eval_in(&self, f: &Formula, env: &mut Vec<(Name, usize)>) -> Result<bool, EvalError> {
        match f {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Atom(r, args) => {
                let vals = args.iter().map(|t| self.term(t, env)).collect::<Result<Vec<_>, _>>()?;
                self.rel(r, &vals)
            }
            Formula::Eq(a, b) => Ok(self.term(a, env)? == self.term(b, env)?),
            Formula::Not(g) => Ok(!self.eval_in(g, env)?),
            Formula::And(gs) => {
                for g in gs {
                    if !self.eval_in(g, env)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(gs) => {
                for g in gs {
                    if self.eval_in(g, env)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Implies(a, b) => Ok(!self.eval_in(a, env)? || self.eval_in(b, env)?),
            Formula::Iff(a, b) => Ok(self.eval_in(a, env)? == self.eval_in(b, env)?),
            Formula::Exists(vs, g) => {
                let parts: Vec<&Formula> = match &**g {
                    Formula::And(cs) => cs.iter().collect(),
                    other => vec![other],
                };
                let levels = levels(vs, &parts);
                let n = env.len();
                let r = self.block(true, vs, &parts, &levels, 0, env);
                env.truncate(n);
                r
            }
            Formula::Forall(vs, g) => {
                let parts: Vec<&Formula> = match &**g {
                    Formula::Or(cs) => cs.iter().collect(),
                    other => vec![other],
                };
                let levels = levels(vs, &parts);
                let n = env.len();
                let r = self.block(false, vs, &parts, &levels, 0, env);
                env.truncate(n);
                r
            }
        }
    }

    /// Backtracking over a quantifier block. For `exists`, finds an
    /// assignment making every part true; for `forall`, checks that every
    /// assignment makes some part true. Parts are tested as soon as all the
    /// block variables they mention are assigned.
    fn block(
        &self,
        exists: bool,
        vs: &[Name],
        parts: &[&Formula],
        levels: &[usize],
        idx: usize,
        env: &mut Vec<(Name, usize)>,
    ) -> Result<bool, EvalError> {
        for (p, &l) in parts.iter().zip(levels) {
            if l == idx {
                let v = self.eval_in(p, env)?;
                if exists && !v {
                    return Ok(false);
                }
                if !exists && v {
                    return Ok(true);
                }
            }
        }
        if idx == vs.len() {
            return Ok(exists);
        }
        for e in 0..self.size {
            env.push((vs[idx].clone(), e));
            let r = self.block(exists, vs, parts, levels, idx + 1, env);
            env.pop();
            let r = r?;
            if exists && r {
                return Ok(true);
            }
            if !exists && !r {
                return Ok(false);
            }
        }
        Ok(!exists)
    }
}

/// For each part, the number of block variables that must be assigned
/// before it can be evaluated.
fn levels(vs: &[Name], parts: &[&Formula]) -> Vec<usize> {
    parts
        .iter()
        .map(|p| {
            let fv: BTreeSet<Name> = p.free_vars();
            vs.iter().enumerate().filter(|(_, v)| fv.contains(*v)).map(|(i, _)| i + 1).max().unwrap_or(0)
        })
        .collect()
}
