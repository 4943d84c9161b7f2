use crate::fol::{Formula, Name, Sym, Term};
use crate::vcgen::{PartTag, VerificationCondition};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// One universally quantified QF matrix of a Skolemized VC.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub vars: Vec<Name>,
    /// d_x: maximal function nesting above the variable.
    pub depth: Vec<usize>,
    /// The binder's body mentions a function application.
    pub restricted: Vec<bool>,
    pub matrix: Formula,
    pub tag: PartTag,
}

impl Clause {
    pub fn is_ground(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn instance(&self, tuple: &[Term]) -> Formula {
        let map: BTreeMap<Name, Term> = self.vars.iter().cloned().zip(tuple.iter().cloned()).collect();
        self.matrix.subst_qf(&map)
    }
}

trait SubstQf {
    fn subst_qf(&self, map: &BTreeMap<Name, Term>) -> Formula;
}

impl SubstQf for Formula {
    fn subst_qf(&self, map: &BTreeMap<Name, Term>) -> Formula {
        self.map_atoms(&mut |a| match a {
            Formula::Atom(r, args) => Formula::Atom(r.clone(), args.iter().map(|t| t.subst(map)).collect()),
            Formula::Eq(l, r) => Formula::Eq(l.subst(map), r.subst(map)),
            _ => unreachable!(),
        })
    }
}

/// Records d_x for every variable occurrence.
fn var_depths(f: &Formula, out: &mut BTreeMap<Name, usize>) {
    fn term(t: &Term, d: usize, out: &mut BTreeMap<Name, usize>) {
        match t {
            Term::Var(v) => {
                let e = out.entry(v.clone()).or_insert(0);
                *e = (*e).max(d);
            }
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| term(a, d + 1, out)),
        }
    }
    f.visit_terms(&mut |t| term(t, 0, out));
}

struct Clausifier<'a> {
    depths: BTreeMap<Name, usize>,
    restricted: BTreeSet<Name>,
    defs: &'a mut usize,
    tag: PartTag,
    out: Vec<Clause>,
}

impl Clausifier<'_> {
    fn mark(&mut self, f: &Formula) {
        match f {
            Formula::Forall(vs, g) => {
                if g.has_function_app() {
                    self.restricted.extend(vs.iter().cloned());
                }
                self.mark(g);
            }
            Formula::Not(g) | Formula::Exists(_, g) => self.mark(g),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| self.mark(g)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                self.mark(a);
                self.mark(b);
            }
            _ => {}
        }
    }

    fn walk(&mut self, f: &Formula, scope: &mut Vec<Name>) {
        match f {
            Formula::True => {}
            Formula::And(gs) => gs.iter().for_each(|g| self.walk(g, scope)),
            Formula::Forall(vs, g) => {
                let n = scope.len();
                scope.extend(vs.iter().cloned());
                self.walk(g, scope);
                scope.truncate(n);
            }
            _ => {
                let matrix = self.define(f, scope);
                self.emit(matrix, scope);
            }
        }
    }

    /// Replaces every ∀-subformula of `f` by a definitional atom.
    fn define(&mut self, f: &Formula, scope: &mut Vec<Name>) -> Formula {
        match f {
            Formula::Forall(..) => {
                let free: Vec<Name> = {
                    let fv = f.free_vars();
                    scope.iter().filter(|v| fv.contains(*v)).cloned().collect()
                };
                let sym = Sym { name: Arc::from(format!("sk_def_{}", *self.defs).as_str()), primed: false };
                *self.defs += 1;
                let atom = Formula::Atom(sym, free.iter().map(|v| Term::Var(v.clone())).collect());
                let mut inner = free;
                self.define_or(&Formula::not(atom.clone()), f, &mut inner);
                atom
            }
            Formula::And(gs) => Formula::and(gs.iter().map(|g| self.define(g, scope)).collect()),
            Formula::Or(gs) => Formula::or(gs.iter().map(|g| self.define(g, scope)).collect()),
            Formula::Not(g) => Formula::not(self.define(g, scope)),
            _ => f.clone(),
        }
    }

    /// Emits the clauses of `¬d ∨ body` under `scope`.
    fn define_or(&mut self, neg: &Formula, body: &Formula, scope: &mut Vec<Name>) {
        match body {
            Formula::And(gs) => {
                for g in gs {
                    self.define_or(neg, g, scope);
                }
            }
            Formula::Forall(vs, g) => {
                let n = scope.len();
                scope.extend(vs.iter().cloned());
                self.define_or(neg, g, scope);
                scope.truncate(n);
            }
            _ => {
                let m = self.define(body, scope);
                self.emit(Formula::or(vec![neg.clone(), m]), scope);
            }
        }
    }

    fn emit(&mut self, matrix: Formula, scope: &[Name]) {
        if matrix == Formula::True {
            return;
        }
        let fv = matrix.free_vars();
        let vars: Vec<Name> = scope.iter().filter(|v| fv.contains(*v)).cloned().collect();
        let depth = vars.iter().map(|v| self.depths.get(v).copied().unwrap_or(0)).collect();
        let restricted = vars.iter().map(|v| self.restricted.contains(v)).collect();
        self.out.push(Clause { vars, depth, restricted, matrix, tag: self.tag });
    }
}

/// Splits every part of a Skolemized VC into universally quantified QF
/// clauses. A universal nested under a disjunction is replaced by a fresh
/// definitional relation `sk_def_N` over its free variables.
pub fn clausify(vc: &VerificationCondition) -> Vec<Clause> {
    let mut defs = 0;
    let mut out = Vec::new();
    for p in &vc.parts {
        let mut depths = BTreeMap::new();
        var_depths(&p.formula, &mut depths);
        let mut c = Clausifier { depths, restricted: BTreeSet::new(), defs: &mut defs, tag: p.tag, out: Vec::new() };
        c.mark(&p.formula);
        c.walk(&p.formula, &mut Vec::new());
        out.extend(c.out);
    }
    out
}

/// Guards each ∀x⃗.θ whose θ contains a function application with
/// `(⋁_c x = c) → θ` over the VC's constants.
pub fn guard_encode(vc: &VerificationCondition) -> VerificationCondition {
    let consts: Vec<Term> = super::constants(vc).into_iter().map(Term::Const).collect();
    let mut out = vc.clone();
    for p in out.parts.iter_mut() {
        p.formula = guard(&p.formula, &consts);
    }
    out
}

fn guard(f: &Formula, consts: &[Term]) -> Formula {
    match f {
        Formula::Forall(vs, g) => {
            let body = guard(g, consts);
            if g.has_function_app() {
                let mut lits = Vec::new();
                for v in vs {
                    let eqs = consts.iter().map(|c| Formula::Eq(Term::Var(v.clone()), c.clone())).collect();
                    lits.push(Formula::not(Formula::or(eqs)));
                }
                lits.push(body);
                Formula::forall(vs.clone(), Formula::or(lits))
            } else {
                Formula::forall(vs.clone(), body)
            }
        }
        Formula::And(gs) => Formula::and(gs.iter().map(|g| guard(g, consts)).collect()),
        Formula::Or(gs) => Formula::or(gs.iter().map(|g| guard(g, consts)).collect()),
        _ => f.clone(),
    }
}
