use super::cc::{Congruence, TermId};
use super::sat::{Lit, SatResult, SatSolver, Var};
use super::{GroundModel, Verdict};
use crate::fol::{Formula, Sym, Term};
use std::collections::{BTreeMap, HashMap};
use std::time::Duration;
use web_time::Instant;

#[derive(Clone, Debug, Default)]
pub struct SmtLimits {
    pub deadline: Option<Instant>,
    pub max_conflicts: Option<u64>,
}

impl SmtLimits {
    pub fn with_timeout(d: Duration) -> SmtLimits {
        SmtLimits { deadline: Some(Instant::now() + d), max_conflicts: None }
    }

    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Atom {
    Eq(TermId, TermId),
    Rel(usize, Vec<TermId>),
}

/// Incremental lazy SMT solver for ground equality with uninterpreted
/// functions and relations. Formulas are Tseitin-encoded into the SAT core;
/// complete propositional models are checked by congruence closure and
/// refuted with explanation clauses.
pub struct SmtSolver {
    sat: SatSolver,
    terms: Vec<Term>,
    term_ids: HashMap<Term, TermId>,
    nodes: Vec<(usize, Vec<TermId>)>,
    syms: Vec<Sym>,
    sym_ids: HashMap<Sym, usize>,
    atoms: HashMap<Atom, Var>,
    atom_of_var: Vec<Option<Atom>>,
    cache: HashMap<Formula, Lit>,
    true_lit: Lit,
    unsat: bool,
    pub theory_rounds: u64,
}

impl Default for SmtSolver {
    fn default() -> Self {
        SmtSolver::new()
    }
}

impl SmtSolver {
    pub fn new() -> SmtSolver {
        let mut sat = SatSolver::new();
        let t = sat.new_var();
        let true_lit = Lit::pos(t);
        sat.add_clause(&[true_lit]);
        SmtSolver {
            sat,
            terms: Vec::new(),
            term_ids: HashMap::new(),
            nodes: Vec::new(),
            syms: Vec::new(),
            sym_ids: HashMap::new(),
            atoms: HashMap::new(),
            atom_of_var: vec![None],
            cache: HashMap::new(),
            true_lit,
            unsat: false,
            theory_rounds: 0,
        }
    }

    fn new_var(&mut self) -> Var {
        self.atom_of_var.push(None);
        self.sat.new_var()
    }

    fn sym_id(&mut self, s: &Sym) -> usize {
        if let Some(&i) = self.sym_ids.get(s) {
            return i;
        }
        let i = self.syms.len();
        self.syms.push(s.clone());
        self.sym_ids.insert(s.clone(), i);
        i
    }

    pub fn intern(&mut self, t: &Term) -> TermId {
        if let Some(&i) = self.term_ids.get(t) {
            return i;
        }
        let (sym, args) = match t {
            Term::Var(v) => panic!("variable {v} in ground formula"),
            Term::Const(c) => (self.sym_id(c), Vec::new()),
            Term::App(f, args) => {
                let ids = args.iter().map(|a| self.intern(a)).collect();
                (self.sym_id(f), ids)
            }
        };
        let id = self.terms.len();
        self.terms.push(t.clone());
        self.nodes.push((sym, args));
        self.term_ids.insert(t.clone(), id);
        id
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    fn atom_lit(&mut self, a: Atom) -> Lit {
        if let Some(&v) = self.atoms.get(&a) {
            return Lit::pos(v);
        }
        let v = self.new_var();
        self.atom_of_var[v.0 as usize] = Some(a.clone());
        self.atoms.insert(a, v);
        Lit::pos(v)
    }

    fn encode(&mut self, f: &Formula) -> Lit {
        match f {
            Formula::True => return self.true_lit,
            Formula::False => return !self.true_lit,
            Formula::Not(g) => return !self.encode(g),
            _ => {}
        }
        if let Some(&l) = self.cache.get(f) {
            return l;
        }
        let l = match f {
            Formula::Atom(r, args) => {
                let rid = self.sym_id(r);
                let ids = args.iter().map(|a| self.intern(a)).collect();
                self.atom_lit(Atom::Rel(rid, ids))
            }
            Formula::Eq(a, b) => {
                let (x, y) = (self.intern(a), self.intern(b));
                if x == y {
                    self.true_lit
                } else {
                    self.atom_lit(Atom::Eq(x.min(y), x.max(y)))
                }
            }
            Formula::And(gs) => {
                let ls: Vec<Lit> = gs.iter().map(|g| self.encode(g)).collect();
                self.define_and(&ls)
            }
            Formula::Or(gs) => {
                let ls: Vec<Lit> = gs.iter().map(|g| !self.encode(g)).collect();
                !self.define_and(&ls)
            }
            Formula::Implies(a, b) => {
                let ls = vec![self.encode(a), !self.encode(b)];
                !self.define_and(&ls)
            }
            Formula::Iff(a, b) => {
                let (x, y) = (self.encode(a), self.encode(b));
                let v = Lit::pos(self.new_var());
                self.sat.add_clause(&[!v, !x, y]);
                self.sat.add_clause(&[!v, x, !y]);
                self.sat.add_clause(&[v, x, y]);
                self.sat.add_clause(&[v, !x, !y]);
                v
            }
            Formula::Forall(..) | Formula::Exists(..) => panic!("quantifier in ground formula: {f}"),
            Formula::True | Formula::False | Formula::Not(_) => unreachable!(),
        };
        self.cache.insert(f.clone(), l);
        l
    }

    fn define_and(&mut self, ls: &[Lit]) -> Lit {
        let v = Lit::pos(self.new_var());
        let mut big = vec![v];
        for &l in ls {
            self.sat.add_clause(&[!v, l]);
            big.push(!l);
        }
        self.sat.add_clause(&big);
        v
    }

    /// Asserts a ground quantifier-free formula.
    pub fn add(&mut self, f: &Formula) {
        match f {
            Formula::And(gs) => gs.iter().for_each(|g| self.add(g)),
            Formula::Or(gs) => {
                let ls: Vec<Lit> = gs.iter().map(|g| self.encode(g)).collect();
                if !self.sat.add_clause(&ls) {
                    self.unsat = true;
                }
            }
            Formula::Implies(a, b) => {
                let ls = [!self.encode(a), self.encode(b)];
                if !self.sat.add_clause(&ls) {
                    self.unsat = true;
                }
            }
            _ => {
                let l = self.encode(f);
                if !self.sat.add_clause(&[l]) {
                    self.unsat = true;
                }
            }
        }
    }

    /// Decides the conjunction of everything added so far.
    pub fn check(&mut self, limits: &SmtLimits) -> Verdict {
        const CHUNK: u64 = 20_000;
        loop {
            if self.unsat {
                return Verdict::Unsat;
            }
            if limits.expired() {
                return Verdict::Resource;
            }
            let chunk = match limits.max_conflicts {
                Some(m) => {
                    if self.sat.conflicts >= m {
                        return Verdict::Resource;
                    }
                    CHUNK.min(m - self.sat.conflicts)
                }
                None => CHUNK,
            };
            match self.sat.solve_limited(Some(chunk)) {
                SatResult::Unsat => {
                    self.unsat = true;
                    return Verdict::Unsat;
                }
                SatResult::Unknown => continue,
                SatResult::Sat => {}
            }
            self.theory_rounds += 1;
            let (cc, conflicts) = self.theory_check();
            if conflicts.is_empty() {
                return Verdict::Sat(self.extract_model(&cc));
            }
            for c in conflicts {
                if !self.sat.add_clause(&c) {
                    self.unsat = true;
                }
            }
        }
    }

    /// Congruence closure over the true equalities of the current complete
    /// assignment; returns explanation clauses for every violated
    /// disequality and every pair of congruent relation atoms with
    /// different values.
    fn theory_check(&mut self) -> (Congruence, Vec<Vec<Lit>>) {
        let mut cc = Congruence::new(self.nodes.clone());
        let mut diseqs = Vec::new();
        let mut rels = Vec::new();
        for (v, a) in self.atom_of_var.iter().enumerate() {
            let Some(a) = a else { continue };
            let val = self.sat.model_value(Var(v as u32));
            match a {
                Atom::Eq(x, y) => {
                    if val {
                        cc.merge(*x, *y, v);
                    } else {
                        diseqs.push((*x, *y, v));
                    }
                }
                Atom::Rel(r, args) => rels.push((*r, args.clone(), v, val)),
            }
        }
        let eq_lit = |v: usize| Lit::pos(Var(v as u32));
        let mut out = Vec::new();
        for (x, y, v) in diseqs {
            if cc.find(x) == cc.find(y) {
                let mut clause = vec![eq_lit(v)];
                clause.extend(cc.explain(x, y).into_iter().map(|t| !eq_lit(t)));
                out.push(clause);
            }
        }
        let mut sigs: HashMap<(usize, Vec<TermId>), (Vec<TermId>, usize, bool)> = HashMap::new();
        for (r, args, v, val) in rels {
            let key = (r, args.iter().map(|&a| cc.find(a)).collect::<Vec<_>>());
            match sigs.get(&key) {
                None => {
                    sigs.insert(key, (args, v, val));
                }
                Some((oargs, ov, oval)) if *oval != val => {
                    let (tv, fv) = if val { (v, *ov) } else { (*ov, v) };
                    let mut clause = vec![!eq_lit(tv), eq_lit(fv)];
                    for (&a, &b) in args.iter().zip(oargs) {
                        clause.extend(cc.explain(a, b).into_iter().map(|t| !eq_lit(t)));
                    }
                    out.push(clause);
                }
                Some(_) => {}
            }
        }
        (cc, out)
    }

    fn extract_model(&self, cc: &Congruence) -> GroundModel {
        let mut rep_class: HashMap<TermId, usize> = HashMap::new();
        let mut class = Vec::with_capacity(self.terms.len());
        for t in 0..self.terms.len() {
            let r = cc.find(t);
            let n = rep_class.len();
            let c = *rep_class.entry(r).or_insert(n);
            class.push(c);
        }
        let mut rels = BTreeMap::new();
        for (v, a) in self.atom_of_var.iter().enumerate() {
            if let Some(Atom::Rel(r, args)) = a {
                let key = (self.syms[*r].clone(), args.iter().map(|&x| class[x]).collect());
                rels.insert(key, self.sat.model_value(Var(v as u32)));
            }
        }
        GroundModel::from_assignment(&self.terms, &class, rels)
    }

    pub fn stats(&self) -> (u64, u64) {
        (self.sat.conflicts, self.theory_rounds)
    }
}
