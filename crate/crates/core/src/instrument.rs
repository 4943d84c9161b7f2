//! Instrumentation transforms: local instantiations of derived relations,
//! the existential-naming side check, and the bounded expansions I_r and
//! I* of an AE invariant.

use crate::fol::{
    fresh_name, pnf, prime, substitute, substitute_relation, FolError, Formula, Name, SkolemCtx, Sym, SymKind,
    Term, Vocabulary,
};
use crate::frontend::{Action, Command, DerivedRelation, ProgramModel};
use crate::horizon::{solve_bounded, BoundedOutcome, Encoding, HorizonError, HorizonOptions};
use crate::models::{quotient_model, PartialModel};
use crate::vcgen::{PartTag, VcKind, VcPart, VerificationCondition};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstrumentError {
    #[error("no action named `{0}`")]
    UnknownAction(String),
    #[error("no derived relation `{0}`")]
    UnknownDerived(String),
    #[error("`{0}` is not in scope in action `{1}`")]
    UnknownVariable(String, String),
    #[error("expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("the matrix of `{0}` is not quantifier free")]
    NotQf(String),
    #[error("`{0}` is not of the form forall* exists* qf")]
    NotAe(String),
    #[error("`{0}` is not of the form exists* forall* qf")]
    NotEa(String),
    #[error("expansion depth must be at least 1")]
    Depth,
    #[error("naming is not defined on `{0}`")]
    NotTotal(String),
    #[error(transparent)]
    Fol(#[from] FolError),
    #[error(transparent)]
    Horizon(#[from] HorizonError),
}

/// Splits `f` (in PNF) into an ∃ prefix, a ∀ prefix and a QF matrix when it
/// has at most the shape ∃*∀*.
fn ea_parts(f: &Formula) -> Option<(Vec<Name>, Vec<Name>, Formula)> {
    let mut ex = Vec::new();
    let mut g = f;
    while let Formula::Exists(vs, b) = g {
        ex.extend(vs.iter().cloned());
        g = b;
    }
    let mut all = Vec::new();
    while let Formula::Forall(vs, b) = g {
        all.extend(vs.iter().cloned());
        g = b;
    }
    g.is_quantifier_free().then(|| (ex, all, g.clone()))
}

/// Same for ∀*∃*.
fn ae_parts(f: &Formula) -> Option<(Vec<Name>, Vec<Name>, Formula)> {
    let mut all = Vec::new();
    let mut g = f;
    while let Formula::Forall(vs, b) = g {
        all.extend(vs.iter().cloned());
        g = b;
    }
    let mut ex = Vec::new();
    while let Formula::Exists(vs, b) = g {
        ex.extend(vs.iter().cloned());
        g = b;
    }
    g.is_quantifier_free().then(|| (all, ex, g.clone()))
}

/// Inserts `local c⃗ := *; assume r(t⃗) → φ(t⃗, c⃗)` at the start of `action`,
/// where `r` is defined by `∃y⃗. φ`. Returns the new model and the fresh
/// `inst_` variables, which later calls may use as arguments.
pub fn local_instantiate(
    model: &ProgramModel,
    rel: &str,
    action: &str,
    args: &[Name],
) -> Result<(ProgramModel, Vec<Name>), InstrumentError> {
    let d = model
        .derived
        .iter()
        .find(|d| d.rel == Sym::new(rel))
        .ok_or_else(|| InstrumentError::UnknownDerived(rel.into()))?
        .clone();
    let ai = model
        .actions
        .iter()
        .position(|a| a.name == action)
        .ok_or_else(|| InstrumentError::UnknownAction(action.into()))?;
    if args.len() != d.params.len() {
        return Err(InstrumentError::Arity { expected: d.params.len(), got: args.len() });
    }
    let a = &model.actions[ai];
    for t in args {
        let in_scope = a.params.contains(t) || a.locals.contains(t) || model.vocab.get(&Sym::new(t)) == Some(SymKind::Const);
        if !in_scope {
            return Err(InstrumentError::UnknownVariable(t.to_string(), action.into()));
        }
    }
    let (ys, matrix) = match pnf(&d.def) {
        Formula::Exists(vs, b) => (vs, *b),
        f => (vec![], f),
    };
    if !matrix.is_quantifier_free() {
        return Err(InstrumentError::NotQf(d.rel.to_string()));
    }
    let mut taken: BTreeSet<Name> = a.params.iter().chain(&a.locals).cloned().collect();
    taken.extend(model.vocab.iter().map(|(s, _)| s.name.clone()));
    let mut map: BTreeMap<Name, Term> =
        d.params.iter().cloned().zip(args.iter().map(|t| Term::Const(Sym::new(t)))).collect();
    let mut fresh = Vec::new();
    for y in &ys {
        let c: Name = fresh_name(&format!("inst_{y}"), &taken);
        taken.insert(c.clone());
        map.insert(y.clone(), Term::Const(Sym { name: c.clone(), primed: false }));
        fresh.push(c);
    }
    let lhs = Formula::Atom(d.rel.clone(), args.iter().map(|t| Term::Const(Sym::new(t))).collect());
    let assume = Command::Assume(Formula::implies(lhs, substitute(&matrix, &map)));
    let mut out = model.clone();
    let act: &mut Action = &mut out.actions[ai];
    let mut cmds: Vec<Command> = fresh.iter().map(|c| Command::Local(c.clone())).collect();
    cmds.push(assume);
    cmds.push(act.body.clone());
    act.body = Command::Block(cmds);
    act.locals.extend(fresh.iter().cloned());
    Ok((out, fresh))
}

/// `f[ψ/r, ψ′/r′]` for every derived relation.
pub fn unfold_derived(f: &Formula, derived: &[DerivedRelation]) -> Result<Formula, InstrumentError> {
    let mut g = f.clone();
    for d in derived {
        g = substitute_relation(&g, &d.rel, &d.params, &d.def)?;
        g = substitute_relation(&g, &d.rel.to_primed(), &d.params, &prime(&d.def)?)?;
    }
    Ok(g)
}

#[derive(Debug, Clone)]
pub enum NamingVerdict {
    Confirmed,
    Unknown(Option<PartialModel>),
    Resource(String),
}

/// Checks that `η(δ̂)[ψ/r, ψ′/r′]` follows from `δ` at `bound`. The ∃ prefix
/// variables of `δ` are Skolemized to constants carrying their own names,
/// so `eta` maps each ∃ variable of `δ̂` to such a name or to a constant.
pub fn check_naming_soundness(
    delta: &Formula,
    delta_hat: &Formula,
    eta: &BTreeMap<Name, Name>,
    derived: &[DerivedRelation],
    vocab: &Vocabulary,
    bound: usize,
) -> Result<NamingVerdict, InstrumentError> {
    let (ex_hat, _, _) = ea_parts(&pnf(delta_hat)).ok_or_else(|| InstrumentError::NotEa(delta_hat.to_string()))?;
    if let Some(y) = ex_hat.iter().find(|y| !eta.contains_key(*y)) {
        return Err(InstrumentError::NotTotal(y.to_string()));
    }
    let mut v = vocab.union(&vocab.primed_copy())?;
    let mut ctx = SkolemCtx::new();
    let d_pnf = pnf(delta);
    let mut g = &d_pnf;
    while let Formula::Exists(vs, b) = g {
        for x in vs {
            let s = Sym { name: x.clone(), primed: false };
            v.ensure(s.clone(), SymKind::Const)?;
            ctx.named.insert(x.clone(), s);
        }
        g = b;
    }
    let sk_delta = ctx.skolemize(&d_pnf, &mut v, "delta");
    ctx.named.clear();
    let p = pnf(delta_hat);
    let mut body = &p;
    while let Formula::Exists(_, b) = body {
        body = b;
    }
    let map: BTreeMap<Name, Term> = ex_hat
        .iter()
        .map(|y| {
            let s = Sym { name: eta[y].clone(), primed: false };
            let _ = v.ensure(s.clone(), SymKind::Const);
            (y.clone(), Term::Const(s))
        })
        .collect();
    let named = unfold_derived(&substitute(body, &map), derived)?;
    for d in derived {
        v.remove(&d.rel);
        v.remove(&d.rel.to_primed());
    }
    let goal = ctx.skolemize(&Formula::not(named), &mut v, "goal");
    let vc = VerificationCondition {
        kind: VcKind::Consecution,
        action: None,
        parts: vec![VcPart { tag: PartTag::Delta, formula: sk_delta }, VcPart { tag: PartTag::Goal, formula: goal }],
        vocab: v,
        origins: ctx.origins,
    };
    let opts = HorizonOptions { bound, encoding: Encoding::Enumerate, ..Default::default() };
    Ok(match solve_bounded(&vc, &opts)?.0 {
        BoundedOutcome::Unsat => NamingVerdict::Confirmed,
        BoundedOutcome::Sat { model, instances } => {
            NamingVerdict::Unknown(quotient_model(&model, &instances, &vc, bound).ok())
        }
        BoundedOutcome::Resource(r) => NamingVerdict::Resource(r),
    })
}

/// A term over the single placeholder `⋆` that stands for every constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Gen {
    Star,
    App(usize, Vec<Gen>),
}

impl Gen {
    fn depth(&self) -> usize {
        match self {
            Gen::Star => 0,
            Gen::App(_, a) => 1 + a.iter().map(Gen::depth).max().unwrap_or(0),
        }
    }
}

fn tuples<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    use itertools::Itertools;
    if n == 0 {
        return vec![vec![]];
    }
    (0..n).map(|_| items.iter().cloned()).multi_cartesian_product().collect()
}

/// The generating tuples of instantiation depth at most `r`, shallowest first.
fn generator_tuples(n: usize, m: usize, r: usize) -> Vec<Vec<Gen>> {
    let mut level = vec![Gen::Star];
    for _ in 0..r {
        let mut next = level.clone();
        for t in tuples(&level, n) {
            for j in 0..m {
                let g = Gen::App(j, t.clone());
                if !next.contains(&g) {
                    next.push(g);
                }
            }
        }
        level = next;
    }
    let mut out = tuples(&level, n);
    out.sort_by_key(|t| (t.iter().map(Gen::depth).max().unwrap_or(0), t.clone()));
    out
}

/// Expands one ∀x⃗∃y⃗.φ sentence.
fn expand_one(f: &Formula, r: usize) -> Result<Formula, InstrumentError> {
    let p = pnf(f);
    let (xs, ys, phi) = ae_parts(&p).ok_or_else(|| InstrumentError::NotAe(f.to_string()))?;
    if ys.is_empty() {
        return Ok(p);
    }
    let tups = generator_tuples(xs.len(), ys.len(), r);
    let mut taken = BTreeSet::new();
    crate::fol::all_vars(&p, &mut taken);
    let mut wit: BTreeMap<(Vec<Gen>, usize), Name> = BTreeMap::new();
    let mut order = Vec::new();
    for t in &tups {
        for (j, y) in ys.iter().enumerate() {
            let n = fresh_name(&format!("{y}_w"), &taken);
            taken.insert(n.clone());
            wit.insert((t.clone(), j), n.clone());
            order.push(n);
        }
    }
    let mut conj = Vec::new();
    for t in &tups {
        let mut map = BTreeMap::new();
        for (i, ti) in t.iter().enumerate() {
            let z = match ti {
                Gen::Star => xs[i].clone(),
                Gen::App(j, inner) => wit[&(inner.clone(), *j)].clone(),
            };
            map.insert(xs[i].clone(), Term::Var(z));
        }
        for j in 0..ys.len() {
            map.insert(ys[j].clone(), Term::Var(wit[&(t.clone(), j)].clone()));
        }
        conj.push(substitute(&phi, &map));
    }
    Ok(Formula::forall(xs, Formula::exists(order, Formula::and(conj))))
}

/// I_r, taken conjunct by conjunct: each ∀x⃗∃y⃗.φ conjunct gets one witness
/// variable `y_w_<i>` per generating tuple of depth at most `r` and
/// existential `y`, with all constants collapsed to one placeholder.
pub fn expand_invariant(inv: &Formula, r: usize) -> Result<Formula, InstrumentError> {
    if r < 1 {
        return Err(InstrumentError::Depth);
    }
    let parts = inv.conjuncts().iter().map(|c| expand_one(c, r)).collect::<Result<Vec<_>, _>>()?;
    Ok(Formula::and(parts))
}

/// I* = I₁ ∧ ⋀_{r<k}(I_r → I_{r+1}).
pub fn star_invariant(inv: &Formula, k: usize) -> Result<Formula, InstrumentError> {
    let k = k.max(1);
    let mut out = vec![expand_invariant(inv, 1)?];
    for r in 1..k {
        out.push(Formula::implies(expand_invariant(inv, r)?, expand_invariant(inv, r + 1)?));
    }
    Ok(Formula::and(out))
}

/// Replaces every invariant declaration of the model by its expansion.
pub fn expand_model(m: &ProgramModel, r: usize, star: bool) -> Result<ProgramModel, InstrumentError> {
    let mut out = m.clone();
    for d in out.invariants.iter_mut() {
        d.formula = if star { star_invariant(&d.formula, r)? } else { expand_invariant(&d.formula, r)? };
    }
    Ok(out)
}

/// Parses `a, b, c` into names.
pub fn parse_args(s: &str) -> Vec<Name> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(Arc::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{desugar, parse, parse_formula};
    use crate::vcgen::delta_of_action;

    fn corpus(name: &str) -> ProgramModel {
        let path = format!("{}/corpus/{name}.bhz", env!("CARGO_MANIFEST_DIR"));
        parse(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    fn count_exists(f: &Formula) -> usize {
        match pnf(f) {
            Formula::Forall(_, b) => match *b {
                Formula::Exists(vs, _) => vs.len(),
                _ => 0,
            },
            Formula::Exists(vs, _) => vs.len(),
            _ => 0,
        }
    }

    #[test]
    fn client_server_i1_witness_count() {
        // ∀u,p. ∃q. φ: n = 2 universals, m = 1 Skolem function. Generators
        // at depth ≤ 1 are {⋆, f(⋆,⋆)}, so 4 tuples and 4 witnesses.
        let m = corpus("client_server_ae");
        let i = &m.invariants[0].formula;
        assert_eq!(generator_tuples(2, 1, 1).len(), 4);
        let i1 = expand_invariant(i, 1).unwrap();
        assert_eq!(count_exists(&i1), 4);
        assert!(matches!(expand_invariant(i, 0), Err(InstrumentError::Depth)));
    }

    #[test]
    fn universal_invariants_are_fixed() {
        let v = parse("relation p(1)").unwrap().vocab;
        let f = parse_formula("forall x. p(x)", &v).unwrap();
        for r in 1..4 {
            assert_eq!(expand_invariant(&f, r).unwrap(), pnf(&f));
        }
        assert_eq!(star_invariant(&f, 1).unwrap(), expand_invariant(&f, 1).unwrap());
    }

    #[test]
    fn local_instantiation_inserts_assume() {
        let m = corpus("client_server_db_instr");
        let before = m.action("db_recv_request").unwrap().locals.len();
        let a = m.action("db_recv_request").unwrap();
        let arg = a.params[0].clone();
        let (m2, fresh) = local_instantiate(&m, "r1", "db_recv_request", &[arg.clone(), arg]).unwrap();
        assert_eq!(fresh.len(), 1);
        assert!(fresh[0].starts_with("inst_"));
        assert_eq!(m2.action("db_recv_request").unwrap().locals.len(), before + 1);
        assert!(desugar(&m2).is_ok());
        assert!(matches!(local_instantiate(&m, "nope", "db_recv_request", &[]), Err(InstrumentError::UnknownDerived(_))));
        assert!(matches!(
            local_instantiate(&m, "r1", "db_recv_request", &[Arc::from("zz"), Arc::from("zz")]),
            Err(InstrumentError::UnknownVariable(..))
        ));
    }

    fn deltas(action: &str) -> (Formula, Formula, ProgramModel) {
        let a = desugar(&corpus("client_server_ae")).unwrap();
        let b = desugar(&corpus("client_server_instr")).unwrap();
        let d = delta_of_action(&a, a.action(action).unwrap()).unwrap();
        let dh = delta_of_action(&b, b.action(action).unwrap()).unwrap();
        (d, dh, b)
    }

    #[test]
    fn identity_naming_is_confirmed() {
        for act in ["new_request", "respond"] {
            let (d, dh, b) = deltas(act);
            let (ex, _, _) = ea_parts(&pnf(&dh)).unwrap();
            let eta: BTreeMap<Name, Name> = ex.iter().map(|y| (y.clone(), y.clone())).collect();
            let mut vocab = b.vocab.clone();
            vocab.remove(&Sym::new("r"));
            let v = check_naming_soundness(&d, &dh, &eta, &b.derived, &vocab, 1).unwrap();
            assert!(matches!(v, NamingVerdict::Confirmed), "{act}: {v:?}");
        }
    }

    #[test]
    fn broken_naming_is_unknown() {
        let (d, dh, b) = deltas("respond");
        let (ex, _, _) = ea_parts(&pnf(&dh)).unwrap();
        let eta: BTreeMap<Name, Name> = ex.iter().map(|y| (y.clone(), Arc::from("unrelated"))).collect();
        let mut vocab = b.vocab.clone();
        vocab.remove(&Sym::new("r"));
        let v = check_naming_soundness(&d, &dh, &eta, &b.derived, &vocab, 1).unwrap();
        assert!(matches!(v, NamingVerdict::Unknown(Some(_))), "{v:?}");
        let partial: BTreeMap<Name, Name> = BTreeMap::new();
        if !ex.is_empty() {
            assert!(matches!(
                check_naming_soundness(&d, &dh, &partial, &b.derived, &vocab, 1),
                Err(InstrumentError::NotTotal(_))
            ));
        }
    }
}
