//! Exhaustive oracle: every congruent partition of the universe, every
//! assignment of the relation atoms over the resulting class tuples.

use super::{GroundModel, GroundProblem, Verdict};
use crate::fol::{AtomRef, Sym, Term};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("universe of {0} terms exceeds the oracle limit of {1}")]
    TooLarge(usize, usize),
    #[error("problem is not ground and quantifier-free")]
    NotGround,
}

/// Restricted-growth strings of length `n`: each encodes one partition.
fn partitions(n: usize, f: &mut impl FnMut(&[usize]) -> bool) {
    fn rec(a: &mut Vec<usize>, n: usize, max: usize, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
        if a.len() == n {
            return f(a);
        }
        for c in 0..=max + 1 {
            if a.is_empty() && c > 0 {
                break;
            }
            a.push(c);
            let next_max = if a.len() == 1 { 0 } else { max.max(c) };
            let stop = rec(a, n, next_max, f);
            a.pop();
            if stop {
                return true;
            }
        }
        false
    }
    if n == 0 {
        f(&[]);
        return;
    }
    rec(&mut Vec::with_capacity(n), n, 0, f);
}

pub fn brute_force_oracle(p: &GroundProblem, max_universe: usize) -> Result<Verdict, OracleError> {
    if !p.is_ground_qf() {
        return Err(OracleError::NotGround);
    }
    let mut universe = p.universe();
    if universe.len() > max_universe {
        return Err(OracleError::TooLarge(universe.len(), max_universe));
    }
    if universe.is_empty() {
        // one element, no terms
        universe = Vec::new();
    }
    let index: HashMap<Term, usize> = universe.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let mut atoms: BTreeSet<(Sym, Vec<usize>)> = BTreeSet::new();
    for s in &p.sentences {
        s.visit_atoms(&mut |a| {
            if let AtomRef::Rel(r, args) = a {
                atoms.insert((r.clone(), args.iter().map(|t| index[t]).collect()));
            }
        });
    }
    let mut result = Verdict::Unsat;
    partitions(universe.len(), &mut |class| {
        // congruence: same symbol and argument classes force the same class
        for (i, ti) in universe.iter().enumerate() {
            for (j, tj) in universe.iter().enumerate().skip(i + 1) {
                if let (Term::App(f, a), Term::App(g, b)) = (ti, tj) {
                    if f == g
                        && a.len() == b.len()
                        && a.iter().zip(b).all(|(x, y)| class[index[x]] == class[index[y]])
                        && class[i] != class[j]
                    {
                        return false;
                    }
                }
            }
        }
        let slots: Vec<(Sym, Vec<usize>)> = atoms
            .iter()
            .map(|(r, args)| (r.clone(), args.iter().map(|&a| class[a]).collect()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let m = slots.len();
        assert!(m < 24, "too many relation slots for the oracle");
        for bits in 0u32..(1 << m) {
            let rels: BTreeMap<(Sym, Vec<usize>), bool> =
                slots.iter().enumerate().map(|(k, s)| (s.clone(), (bits >> k) & 1 == 1)).collect();
            let model = GroundModel::from_assignment(&universe, class, rels);
            if p.sentences.iter().all(|s| model.eval(s).unwrap_or(false)) {
                result = Verdict::Sat(model);
                return true;
            }
        }
        false
    });
    Ok(result)
}
