//! Model-guided instantiation restricted to the bounded term set.
//!
//! The solver starts from the ground clauses. Each satisfying ground model
//! is completed (missing function entries go to class 0, missing relation
//! entries are false) and every clause is evaluated over the element values
//! of its term level. Falsified assignments become instances over witness
//! terms of minimal depth. When no clause is falsified the completed model
//! satisfies the whole bounded instantiation set.

use super::{constants, prepare, problem_vocab, var_levels, Clause, Encoding, HorizonError};
use crate::fol::{Formula, Sym, SymKind, Term};
use crate::solver::{GroundModel, SmtLimits, SmtSolver, Verdict};
use crate::vcgen::VerificationCondition;
use std::collections::{HashMap, HashSet};
use std::time::Duration;
use web_time::Instant;

#[derive(Clone, Debug)]
pub struct HorizonOptions {
    pub bound: usize,
    pub encoding: Encoding,
    pub instance_limit: usize,
    pub timeout: Option<Duration>,
    /// Materialize the whole instantiation set up front.
    pub eager: bool,
}

impl Default for HorizonOptions {
    fn default() -> Self {
        HorizonOptions {
            bound: 1,
            encoding: Encoding::Enumerate,
            instance_limit: 1_000_000,
            timeout: Some(Duration::from_secs(60)),
            eager: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub rounds: usize,
    pub instances: usize,
    pub terms: usize,
    pub conflicts: u64,
}

#[derive(Clone, Debug)]
pub enum BoundedOutcome {
    Unsat,
    /// The ground model together with the instances it was checked against.
    Sat { model: GroundModel, instances: Vec<Formula> },
    Resource(String),
}

impl BoundedOutcome {
    pub fn is_unsat(&self) -> bool {
        matches!(self, BoundedOutcome::Unsat)
    }
}

const PER_CLAUSE_CAP: usize = 64;
const PER_ROUND_CAP: usize = 4000;

#[derive(Clone, Debug)]
enum CT {
    Var(usize),
    Const(usize),
    App(usize, Vec<CT>),
}

#[derive(Clone, Debug)]
enum CF {
    Const(bool),
    Rel(usize, Vec<CT>),
    Eq(CT, CT),
    Not(Box<CF>),
    And(Vec<CF>),
    Or(Vec<CF>),
}

struct Ids {
    consts: HashMap<Sym, usize>,
    funcs: HashMap<Sym, usize>,
    rels: HashMap<Sym, usize>,
}

impl Ids {
    fn term(&self, t: &Term, vars: &[crate::fol::Name]) -> CT {
        match t {
            Term::Var(v) => CT::Var(vars.iter().position(|x| x == v).expect("clause variable")),
            Term::Const(c) => CT::Const(self.consts[c]),
            Term::App(f, args) => CT::App(self.funcs[f], args.iter().map(|a| self.term(a, vars)).collect()),
        }
    }

    fn formula(&self, f: &Formula, vars: &[crate::fol::Name]) -> CF {
        match f {
            Formula::True => CF::Const(true),
            Formula::False => CF::Const(false),
            Formula::Atom(r, args) => CF::Rel(self.rels[r], args.iter().map(|a| self.term(a, vars)).collect()),
            Formula::Eq(a, b) => CF::Eq(self.term(a, vars), self.term(b, vars)),
            Formula::Not(g) => CF::Not(Box::new(self.formula(g, vars))),
            Formula::And(gs) => CF::And(gs.iter().map(|g| self.formula(g, vars)).collect()),
            Formula::Or(gs) => CF::Or(gs.iter().map(|g| self.formula(g, vars)).collect()),
            Formula::Implies(a, b) => CF::Or(vec![CF::Not(Box::new(self.formula(a, vars))), self.formula(b, vars)]),
            Formula::Iff(a, b) => {
                let (x, y) = (self.formula(a, vars), self.formula(b, vars));
                CF::And(vec![
                    CF::Or(vec![CF::Not(Box::new(x.clone())), y.clone()]),
                    CF::Or(vec![x, CF::Not(Box::new(y))]),
                ])
            }
            Formula::Forall(..) | Formula::Exists(..) => panic!("quantifier in clause matrix"),
        }
    }
}

/// The completed structure M* read off a ground model.
struct Completed {
    consts: Vec<usize>,
    funcs: Vec<HashMap<Vec<usize>, usize>>,
    rels: Vec<HashMap<Vec<usize>, bool>>,
}

impl Completed {
    fn new(m: &GroundModel, ids: &Ids) -> Completed {
        let mut consts = vec![0; ids.consts.len()];
        for (c, &i) in &ids.consts {
            consts[i] = m.class_of.get(&Term::Const(c.clone())).copied().unwrap_or(0);
        }
        let mut funcs = vec![HashMap::new(); ids.funcs.len()];
        for ((f, args), &v) in &m.func_table {
            if let Some(&i) = ids.funcs.get(f) {
                funcs[i].insert(args.clone(), v);
            }
        }
        let mut rels = vec![HashMap::new(); ids.rels.len()];
        for ((r, args), &v) in &m.rel_table {
            if let Some(&i) = ids.rels.get(r) {
                rels[i].insert(args.clone(), v);
            }
        }
        Completed { consts, funcs, rels }
    }

    fn term(&self, t: &CT, env: &[Option<usize>]) -> Option<usize> {
        match t {
            CT::Var(i) => env[*i],
            CT::Const(c) => Some(self.consts[*c]),
            CT::App(f, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.term(a, env)?);
                }
                Some(self.funcs[*f].get(&vals).copied().unwrap_or(0))
            }
        }
    }

    /// Kleene evaluation; `None` when the value depends on unassigned
    /// variables.
    fn eval(&self, f: &CF, env: &[Option<usize>]) -> Option<bool> {
        match f {
            CF::Const(b) => Some(*b),
            CF::Rel(r, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.term(a, env)?);
                }
                Some(self.rels[*r].get(&vals).copied().unwrap_or(false))
            }
            CF::Eq(a, b) => Some(self.term(a, env)? == self.term(b, env)?),
            CF::Not(g) => self.eval(g, env).map(|b| !b),
            CF::And(gs) => {
                let mut unknown = false;
                for g in gs {
                    match self.eval(g, env) {
                        Some(false) => return Some(false),
                        None => unknown = true,
                        _ => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            CF::Or(gs) => {
                let mut unknown = false;
                for g in gs {
                    match self.eval(g, env) {
                        Some(true) => return Some(true),
                        None => unknown = true,
                        _ => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(false)
                }
            }
        }
    }

    /// Element values of T_0..T_max together with one witness term of
    /// minimal depth per element.
    fn levels(&self, ids: &Ids, base: &[Sym], funcs: &[(Sym, usize)], max: usize) -> (Vec<Vec<usize>>, HashMap<usize, Term>) {
        let mut wit: HashMap<usize, Term> = HashMap::new();
        let mut cur: Vec<usize> = Vec::new();
        for c in base {
            let e = self.consts[ids.consts[c]];
            if let std::collections::hash_map::Entry::Vacant(v) = wit.entry(e) {
                v.insert(Term::Const(c.clone()));
                cur.push(e);
            }
        }
        let mut out = vec![cur.clone()];
        for _ in 0..max {
            let prev = cur.clone();
            for (f, a) in funcs {
                let fid = ids.funcs[f];
                let mut idx = vec![0usize; *a];
                if prev.is_empty() {
                    continue;
                }
                loop {
                    let args: Vec<usize> = idx.iter().map(|&i| prev[i]).collect();
                    let e = self.funcs[fid].get(&args).copied().unwrap_or(0);
                    if !wit.contains_key(&e) {
                        let t = Term::App(f.clone(), args.iter().map(|x| wit[x].clone()).collect());
                        wit.insert(e, t);
                        cur.push(e);
                    }
                    let mut j = 0;
                    while j < *a {
                        idx[j] += 1;
                        if idx[j] < prev.len() {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                    if j == *a {
                        break;
                    }
                }
            }
            out.push(cur.clone());
        }
        (out, wit)
    }
}

struct Compiled {
    cf: CF,
    levels: Vec<usize>,
}

/// Deadline polling for the violation search.
struct Budget<'a> {
    limits: &'a SmtLimits,
    steps: u64,
    expired: bool,
}

impl Budget<'_> {
    fn tick(&mut self) -> bool {
        self.steps += 1;
        if self.steps % 4096 == 0 && self.limits.expired() {
            self.expired = true;
        }
        self.expired
    }
}

fn dfs(
    m: &Completed,
    c: &Compiled,
    doms: &[&[usize]],
    env: &mut Vec<Option<usize>>,
    i: usize,
    out: &mut Vec<Vec<usize>>,
    budget: &mut Budget,
) {
    if out.len() >= PER_CLAUSE_CAP || budget.tick() {
        return;
    }
    match m.eval(&c.cf, env) {
        Some(true) => {}
        Some(false) => {
            out.push((0..env.len()).map(|j| env[j].unwrap_or(doms[j][0])).collect());
        }
        None => {
            if i >= env.len() {
                return;
            }
            for &e in doms[i] {
                env[i] = Some(e);
                dfs(m, c, doms, env, i + 1, out, budget);
                env[i] = None;
                if out.len() >= PER_CLAUSE_CAP || budget.expired {
                    return;
                }
            }
        }
    }
}

/// Decides the bound-k instantiation set of `vc` under the chosen
/// encoding.
pub fn solve_bounded(vc: &VerificationCondition, opts: &HorizonOptions) -> Result<(BoundedOutcome, EngineStats), HorizonError> {
    let k = opts.bound;
    let clauses = prepare(vc, k, opts.encoding)?;
    let limits = SmtLimits { deadline: opts.timeout.map(|d| Instant::now() + d), max_conflicts: None };
    let mut stats = EngineStats::default();
    let mut smt = SmtSolver::new();
    let base = constants(vc);
    for c in &base {
        smt.intern(&Term::Const(c.clone()));
    }
    if opts.eager {
        let set = super::build_set(vc, k, opts.encoding, opts.instance_limit);
        let set = match set {
            Ok(s) => s,
            Err(HorizonError::Limit(n)) => return Ok((BoundedOutcome::Resource(format!("instance limit {n}")), stats)),
            Err(e) => return Err(e),
        };
        let sentences = set.sentences();
        for s in &sentences {
            smt.add(s);
        }
        stats.instances = sentences.len();
        stats.rounds = 1;
        let v = smt.check(&limits);
        stats.terms = smt.terms().len();
        stats.conflicts = smt.stats().0;
        return Ok((
            match v {
                Verdict::Unsat => BoundedOutcome::Unsat,
                Verdict::Sat(model) => BoundedOutcome::Sat { model, instances: sentences },
                Verdict::Resource => BoundedOutcome::Resource("timeout".into()),
            },
            stats,
        ));
    }

    let pv = problem_vocab(vc, &clauses);
    let mut ids = Ids { consts: HashMap::new(), funcs: HashMap::new(), rels: HashMap::new() };
    for (s, kind) in pv.iter() {
        match kind {
            SymKind::Const => {
                let n = ids.consts.len();
                ids.consts.insert(s.clone(), n);
            }
            SymKind::Func(_) => {
                let n = ids.funcs.len();
                ids.funcs.insert(s.clone(), n);
            }
            SymKind::Rel(_) => {
                let n = ids.rels.len();
                ids.rels.insert(s.clone(), n);
            }
        }
    }
    let funcs = pv.funcs();

    let mut added: HashSet<Formula> = HashSet::new();
    let mut instances: Vec<Formula> = Vec::new();
    let mut compiled: Vec<(usize, Compiled)> = Vec::new();
    for (i, c) in clauses.iter().enumerate() {
        if c.is_ground() {
            if added.insert(c.matrix.clone()) {
                smt.add(&c.matrix);
                instances.push(c.matrix.clone());
            }
            continue;
        }
        let Some(levels) = var_levels(c, k, opts.encoding) else { continue };
        compiled.push((i, Compiled { cf: ids.formula(&c.matrix, &c.vars), levels }));
    }
    let max_level = compiled.iter().flat_map(|(_, c)| c.levels.iter().copied()).max().unwrap_or(0);

    loop {
        if limits.expired() {
            return Ok((BoundedOutcome::Resource("timeout".into()), finish(stats, &smt, &instances)));
        }
        stats.rounds += 1;
        let model = match smt.check(&limits) {
            Verdict::Unsat => return Ok((BoundedOutcome::Unsat, finish(stats, &smt, &instances))),
            Verdict::Resource => {
                return Ok((BoundedOutcome::Resource("timeout".into()), finish(stats, &smt, &instances)))
            }
            Verdict::Sat(m) => m,
        };
        let m = Completed::new(&model, &ids);
        let (vals, wit) = m.levels(&ids, &base, &funcs, max_level);
        let mut fresh = 0;
        let mut budget = Budget { limits: &limits, steps: 0, expired: false };
        for (ci, c) in &compiled {
            let doms: Vec<&[usize]> = c.levels.iter().map(|&b| vals[b].as_slice()).collect();
            let mut env = vec![None; doms.len()];
            let mut viol = Vec::new();
            dfs(&m, c, &doms, &mut env, 0, &mut viol, &mut budget);
            if budget.expired {
                return Ok((BoundedOutcome::Resource("timeout".into()), finish(stats, &smt, &instances)));
            }
            let clause: &Clause = &clauses[*ci];
            for es in viol {
                let tuple: Vec<Term> = es.iter().map(|e| wit[e].clone()).collect();
                let s = clause.instance(&tuple);
                if added.insert(s.clone()) {
                    smt.add(&s);
                    instances.push(s);
                    fresh += 1;
                    if instances.len() > opts.instance_limit {
                        let n = opts.instance_limit;
                        return Ok((BoundedOutcome::Resource(format!("instance limit {n}")), finish(stats, &smt, &instances)));
                    }
                }
            }
            if fresh >= PER_ROUND_CAP {
                break;
            }
        }
        if fresh == 0 {
            let st = finish(stats, &smt, &instances);
            return Ok((BoundedOutcome::Sat { model, instances }, st));
        }
    }
}

fn finish(mut stats: EngineStats, smt: &SmtSolver, instances: &[Formula]) -> EngineStats {
    stats.instances = instances.len();
    stats.terms = smt.terms().len();
    stats.conflicts = smt.stats().0;
    stats
}
