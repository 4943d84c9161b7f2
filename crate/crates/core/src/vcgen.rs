//! Weakest preconditions, transition relations and verification conditions.

use crate::fol::{
    all_vars, fresh_name, is_universal, nnf, pnf, prime, substitute, substitute_relation, FolError, Formula,
    Name, SkolemCtx, SkolemOrigin, Sym, SymKind, Term, Vocabulary,
};
use crate::frontend::{desugar, Action, Command, DesugarError, ProgramModel, ERROR_REL};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VcError {
    #[error("command is not in core form: {0:?}")]
    NotCore(Box<Command>),
    #[error(transparent)]
    Fol(#[from] FolError),
    #[error(transparent)]
    Desugar(#[from] DesugarError),
    #[error("invariant conjunct `{0}` is not universal")]
    NotUniversal(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
}

/// wp(c, Q) following the RML rules. `axiom` is the conjunction A that
/// guards havoc and update.
pub fn wp(c: &Command, q: &Formula, axiom: &Formula) -> Result<Formula, VcError> {
    Ok(match c {
        Command::Skip => q.clone(),
        Command::Abort => Formula::False,
        Command::Update { rel, params, body } => {
            let aq = guarded(axiom, q);
            substitute_relation(&aq, rel, params, body)?
        }
        Command::Havoc(v) => {
            let aq = guarded(axiom, q);
            let mut avoid = BTreeSet::new();
            all_vars(&aq, &mut avoid);
            let x: Name = if avoid.contains(&v.name) { fresh_name(&v.name, &avoid) } else { v.name.clone() };
            Formula::forall(vec![x.clone()], aq.replace_const(v, &Term::Var(x)))
        }
        Command::Assume(phi) => Formula::implies(phi.clone(), q.clone()),
        Command::Seq(a, b) => {
            let inner = wp(b, q, axiom)?;
            wp(a, &inner, axiom)?
        }
        Command::Choice(a, b) => Formula::and(vec![wp(a, q, axiom)?, wp(b, q, axiom)?]),
        other => return Err(VcError::NotCore(Box::new(other.clone()))),
    })
}

fn guarded(axiom: &Formula, q: &Formula) -> Formula {
    match axiom {
        Formula::True => q.clone(),
        a => Formula::implies(a.clone(), q.clone()),
    }
}

/// ψ_{Σ=Σ′}: every state relation and program variable keeps its value.
pub fn frame(vocab: &Vocabulary) -> Formula {
    let mut parts = Vec::new();
    for (s, k) in vocab.iter() {
        if s.primed {
            continue;
        }
        match k {
            SymKind::Rel(a) => {
                let xs: Vec<Name> = (0..a).map(|i| Arc::from(format!("x{i}").as_str())).collect();
                let args: Vec<Term> = xs.iter().map(|x| Term::Var(x.clone())).collect();
                let f = Formula::iff(Formula::Atom(s.clone(), args.clone()), Formula::Atom(s.to_primed(), args));
                parts.push(Formula::forall(xs, f));
            }
            SymKind::Const => parts.push(Formula::Eq(Term::Const(s.clone()), Term::Const(s.to_primed()))),
            SymKind::Func(_) => {}
        }
    }
    Formula::and(parts)
}

/// δ[C] = ¬wp(C, ¬ψ_{Σ=Σ′}) over the state vocabulary.
pub fn delta_of_command(c: &Command, vocab: &Vocabulary, axiom: &Formula) -> Result<Formula, VcError> {
    let post = Formula::not(frame(vocab));
    Ok(Formula::not(wp(c, &post, axiom)?))
}

/// A transition relation: the whole δ and the per-action A ∧ δ[C_i].
#[derive(Clone, Debug)]
pub struct TransitionRelation {
    pub delta: Formula,
    pub per_action: Vec<(String, Formula)>,
}

/// A ∧ δ[C] for one action of a desugared model. Locals that are never
/// havocked (the `sk_` references) are existentially bound by name.
pub fn delta_of_action(m: &ProgramModel, a: &Action) -> Result<Formula, VcError> {
    let axiom = m.axiom();
    let d = delta_of_command(&a.body, &m.vocab, &axiom)?;
    let consts = d.consts();
    let free_locals: Vec<Name> =
        a.locals.iter().filter(|l| consts.contains(&Sym { name: (*l).clone(), primed: false })).cloned().collect();
    let mut d = d;
    for l in &free_locals {
        d = d.replace_const(&Sym { name: l.clone(), primed: false }, &Term::Var(l.clone()));
    }
    Ok(Formula::and(vec![axiom, Formula::exists(free_locals, d)]))
}

pub fn delta_of_program(m: &ProgramModel) -> Result<TransitionRelation, VcError> {
    let m = if m.desugared { m.clone() } else { desugar(m)? };
    let mut per_action = Vec::new();
    let mut disj = Vec::new();
    for a in &m.actions {
        let d = delta_of_action(&m, a)?;
        disj.push(d.clone());
        per_action.push((a.name.clone(), d));
    }
    Ok(TransitionRelation { delta: Formula::and(vec![m.axiom(), Formula::or(disj)]), per_action })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VcKind {
    Initiation,
    Consecution,
    Safety,
    SkolemAware,
}

impl fmt::Display for VcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VcKind::Initiation => "initiation",
            VcKind::Consecution => "consecution",
            VcKind::Safety => "safety",
            VcKind::SkolemAware => "skolem-aware",
        })
    }
}

/// Which part of the VC a conjunct came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartTag {
    /// φ₀ ∧ A in initiation.
    Init,
    /// Sk(I), or Sk(I ∧ A) in the safety VC.
    InvPre,
    /// Sk(A ∧ δ).
    Delta,
    /// Sk(¬I′).
    InvPost,
    /// Sk(¬I) in initiation, Sk(¬φ_P) in safety.
    Goal,
}

impl PartTag {
    fn origin(self) -> &'static str {
        match self {
            PartTag::Init => "init",
            PartTag::InvPre => "invariant-pre",
            PartTag::Delta => "delta",
            PartTag::InvPost => "invariant-post",
            PartTag::Goal => "goal",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcPart {
    pub tag: PartTag,
    pub formula: Formula,
}

/// A Skolemized conjunction whose unsatisfiability is the check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationCondition {
    pub kind: VcKind,
    pub action: Option<String>,
    pub parts: Vec<VcPart>,
    /// Σ ⊎ Σ′ ⊎ Σ_Sk.
    pub vocab: Vocabulary,
    pub origins: BTreeMap<Sym, SkolemOrigin>,
}

impl VerificationCondition {
    pub fn formula(&self) -> Formula {
        Formula::and(self.parts.iter().map(|p| p.formula.clone()).collect())
    }

    pub fn skolem_functions(&self) -> Vec<(Sym, usize)> {
        self.vocab.funcs()
    }

    pub fn skolem_constants(&self) -> Vec<Sym> {
        self.origins.keys().filter(|s| self.vocab.get(s) == Some(SymKind::Const)).cloned().collect()
    }

    /// No function symbols: bound 0 decides the VC.
    pub fn is_complete(&self) -> bool {
        self.vocab.is_relational()
    }

    pub fn is_universal(&self) -> bool {
        self.parts.iter().all(|p| is_universal(&p.formula))
    }

    pub fn name(&self) -> String {
        match &self.action {
            Some(a) => format!("{}[{a}]", self.kind),
            None => self.kind.to_string(),
        }
    }
}

struct Builder {
    ctx: SkolemCtx,
    vocab: Vocabulary,
    parts: Vec<VcPart>,
}

impl Builder {
    fn new(vocab: Vocabulary) -> Builder {
        Builder { ctx: SkolemCtx::new(), vocab, parts: Vec::new() }
    }

    fn add(&mut self, tag: PartTag, f: &Formula) {
        let g = self.ctx.skolemize(f, &mut self.vocab, tag.origin());
        self.parts.push(VcPart { tag, formula: g });
    }

    fn finish(self, kind: VcKind, action: Option<String>) -> VerificationCondition {
        VerificationCondition { kind, action, parts: self.parts, vocab: self.vocab, origins: self.ctx.origins }
    }
}

fn not_error() -> Formula {
    Formula::not(Formula::Atom(Sym::new(ERROR_REL), vec![]))
}

/// Sk(φ₀ ∧ A ∧ ¬error) ∧ Sk(¬I).
pub fn initiation_vc(init: &Formula, inv: &Formula, axiom: &Formula, vocab: &Vocabulary) -> VerificationCondition {
    let mut b = Builder::new(vocab.clone());
    let mut pre = vec![init.clone(), axiom.clone()];
    if vocab.contains(&Sym::new(ERROR_REL)) {
        pre.push(not_error());
    }
    b.add(PartTag::Init, &Formula::and(pre));
    b.add(PartTag::Goal, &Formula::not(inv.clone()));
    b.finish(VcKind::Initiation, None)
}

/// Sk(I ∧ A) ∧ Sk(¬φ_P).
pub fn safety_vc(inv: &Formula, safety: &Formula, axiom: &Formula, vocab: &Vocabulary) -> VerificationCondition {
    let mut b = Builder::new(vocab.clone());
    b.add(PartTag::InvPre, &Formula::and(vec![inv.clone(), axiom.clone()]));
    b.add(PartTag::Goal, &Formula::not(safety.clone()));
    b.finish(VcKind::Safety, None)
}

/// Names bound by ∃ in `delta` that refer to `sk_` program constants.
fn named_skolems(delta: &Formula) -> BTreeSet<Name> {
    let mut vs = BTreeSet::new();
    all_vars(delta, &mut vs);
    vs.into_iter().filter(|v| v.starts_with("sk_")).collect()
}

fn consecution_builder(delta: &Formula, vocab: &Vocabulary) -> Result<Builder, VcError> {
    let mut v = vocab.union(&vocab.primed_copy())?;
    let mut b = Builder::new(Vocabulary::new());
    for n in named_skolems(delta) {
        let s = Sym { name: n.clone(), primed: false };
        v.ensure(s.clone(), SymKind::Const)?;
        b.ctx.named.insert(n, s.clone());
        b.ctx.origins.insert(s, SkolemOrigin { var: Arc::from("named"), tag: "named".into() });
    }
    b.vocab = v;
    Ok(b)
}

/// Sk(I) ∧ Sk(δ) ∧ Sk(¬I′) with one shared Skolem context. `delta` should
/// already contain the axioms.
pub fn consecution_vc(
    inv: &Formula,
    delta: &Formula,
    vocab: &Vocabulary,
    action: Option<String>,
) -> Result<VerificationCondition, VcError> {
    let mut b = consecution_builder(delta, vocab)?;
    b.add(PartTag::InvPre, inv);
    b.add(PartTag::Delta, delta);
    b.add(PartTag::InvPost, &Formula::not(prime(inv)?));
    Ok(b.finish(VcKind::Consecution, action))
}

/// Splits a universal sentence into its universal prefix and QF matrix.
fn universal_parts(f: &Formula) -> Result<(Vec<Name>, Formula), VcError> {
    let g = pnf(f);
    let (vars, matrix) = match g {
        Formula::Forall(vs, body) => (vs, *body),
        other => (vec![], other),
    };
    if !matrix.is_quantifier_free() {
        return Err(VcError::NotUniversal(f.to_string()));
    }
    Ok((vars, matrix))
}

/// Skolemization-aware consecution for a universal invariant: the
/// existentials of ¬Î′ become the constants `sk_<var>` that the action
/// body may mention, so δ̂ and the post-state share them.
pub fn skolem_aware_vc(
    inv: &Formula,
    delta: &Formula,
    vocab: &Vocabulary,
    action: Option<String>,
) -> Result<VerificationCondition, VcError> {
    let mut b = consecution_builder(delta, vocab)?;
    let mut post = Vec::new();
    for c in nnf(inv).conjuncts() {
        let (vars, matrix) = universal_parts(&c)?;
        let mut map = BTreeMap::new();
        for x in &vars {
            let s = Sym::new(&format!("sk_{x}"));
            b.vocab.ensure(s.clone(), SymKind::Const)?;
            b.ctx.origins.entry(s.clone()).or_insert(SkolemOrigin { var: x.clone(), tag: "invariant-post".into() });
            map.insert(x.clone(), Term::Const(s));
        }
        post.push(Formula::not(substitute(&prime(&matrix)?, &map)));
    }
    b.add(PartTag::InvPre, inv);
    b.add(PartTag::Delta, delta);
    let post = Formula::or(post);
    b.parts.push(VcPart { tag: PartTag::InvPost, formula: nnf(&post) });
    Ok(b.finish(VcKind::SkolemAware, action))
}

/// True if the action body mentions `sk_` constants, i.e. was written
/// against the Skolemization-aware VC.
pub fn uses_skolem_names(a: &Action) -> bool {
    a.locals.iter().any(|l| l.starts_with("sk_"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::{Structure, SymKind};
    use crate::frontend::{parse, parse_formula};

    fn vocab(spec: &[(&str, SymKind)]) -> Vocabulary {
        let mut v = Vocabulary::new();
        for (n, k) in spec {
            v.add(Sym::new(n), *k).unwrap();
        }
        v
    }

    /// Executes a core command on a structure; returns every final state.
    fn exec(c: &Command, s: &Structure) -> Vec<Structure> {
        match c {
            Command::Skip => vec![s.clone()],
            Command::Abort => vec![],
            Command::Update { rel, params, body } => {
                let mut t = s.clone();
                let (a, _) = s.rels[rel].clone();
                let n = s.size;
                for idx in 0..n.pow(a as u32) {
                    let mut args = vec![0; a];
                    let mut k = idx;
                    for i in (0..a).rev() {
                        args[i] = k % n;
                        k /= n;
                    }
                    let mut env: Vec<(Name, usize)> = params.iter().cloned().zip(args.iter().copied()).collect();
                    let v = s.eval_in(body, &mut env).unwrap();
                    t.set_rel(rel, &args, v);
                }
                vec![t]
            }
            Command::Havoc(v) => (0..s.size)
                .map(|e| {
                    let mut t = s.clone();
                    t.consts.insert(v.clone(), e);
                    t
                })
                .collect(),
            Command::Assume(f) => {
                if s.eval(f).unwrap() {
                    vec![s.clone()]
                } else {
                    vec![]
                }
            }
            Command::Seq(a, b) => exec(a, s).iter().flat_map(|t| exec(b, t)).collect(),
            Command::Choice(a, b) => {
                let mut v = exec(a, s);
                v.extend(exec(b, s));
                v
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn wp_skip_and_choice() {
        let q = parse_formula("r(a)", &vocab(&[("r", SymKind::Rel(1)), ("a", SymKind::Const)])).unwrap();
        assert_eq!(wp(&Command::Skip, &q, &Formula::True).unwrap(), q);
        let c = Command::Choice(Box::new(Command::Skip), Box::new(Command::Assume(Formula::False)));
        let w = wp(&c, &q, &Formula::True).unwrap();
        assert_eq!(w, Formula::and(vec![q.clone(), Formula::implies(Formula::False, q)]));
    }

    #[test]
    fn wp_matches_explicit_semantics() {
        let v = vocab(&[("r", SymKind::Rel(1)), ("v", SymKind::Const)]);
        let x: Name = Arc::from("x");
        let c = Command::Seq(
            Box::new(Command::Update {
                rel: Sym::new("r"),
                params: vec![x.clone()],
                body: Formula::Eq(Term::Var(x), Term::cst("v")),
            }),
            Box::new(Command::Assume(parse_formula("exists y. r(y)", &v).unwrap())),
        );
        let q = parse_formula("r(v)", &v).unwrap();
        let w = wp(&c, &q, &Formula::True).unwrap();
        for size in 1..=2 {
            for s in Structure::enumerate(&v, size) {
                let direct = exec(&c, &s).iter().all(|t| t.eval(&q).unwrap());
                assert_eq!(s.eval(&w).unwrap(), direct);
            }
        }
    }

    fn check_delta(src: &str) {
        let m = desugar(&parse(src).unwrap()).unwrap();
        let tr = delta_of_program(&m).unwrap();
        let full = m.vocab.union(&m.vocab.primed_copy()).unwrap();
        for (name, d) in &tr.per_action {
            let a = m.action(name).unwrap();
            assert!(crate::fol::is_epr(d), "{d}");
            for size in 1..=2 {
                for s in Structure::enumerate(&m.vocab, size) {
                    let succ = exec(&a.body, &s);
                    for t in Structure::enumerate(&m.vocab, size) {
                        let mut st = s.clone();
                        for (sym, val) in &t.consts {
                            if m.vocab.get(sym) == Some(SymKind::Const) {
                                st.consts.insert(sym.to_primed(), *val);
                            }
                        }
                        for (sym, tbl) in &t.rels {
                            st.rels.insert(sym.to_primed(), tbl.clone());
                        }
                        let _ = &full;
                        let reach = succ.iter().any(|u| {
                            u.rels == t.rels && m.vocab.consts().iter().all(|c| u.consts[c] == t.consts[c])
                        });
                        assert_eq!(st.eval(d).unwrap(), reach, "action {name}");
                    }
                }
            }
        }
    }

    #[test]
    fn delta_matches_explicit_semantics() {
        check_delta(
            "relation r(1)\nvariable v\naction a { v := *; r.insert(v) }\naction b { local y := *; assume r(y); r.remove(y) }\naction c { skip }",
        );
    }

    #[test]
    fn delta_of_havoc_frames_relations() {
        check_delta("relation r(2)\nvariable v\naction h { v := * }");
    }

    #[test]
    fn client_server_consecution_shape() {
        let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/client_server_ae.bhz")).unwrap();
        let m = desugar(&parse(&src).unwrap()).unwrap();
        let tr = delta_of_program(&m).unwrap();
        assert_eq!(tr.per_action.len(), 3);
        let inv = m.inductive_invariant();
        let vc = consecution_vc(&inv, &tr.per_action[0].1, &m.vocab, Some(tr.per_action[0].0.clone())).unwrap();
        assert!(vc.is_universal());
        let funcs = vc.skolem_functions();
        assert_eq!(funcs.len(), 1);
        assert_eq!(funcs[0].1, 2);
        let post_consts: Vec<_> =
            vc.origins.iter().filter(|(s, o)| o.tag == "invariant-post" && vc.vocab.get(s) == Some(SymKind::Const)).collect();
        assert_eq!(post_consts.len(), 2);
    }

    #[test]
    fn skolem_aware_shares_names() {
        let src =
            std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/client_server_db_instr.bhz")).unwrap();
        let m = desugar(&parse(&src).unwrap()).unwrap();
        let a = m.actions.iter().find(|a| uses_skolem_names(a)).unwrap();
        let d = delta_of_action(&m, a).unwrap();
        let vc = skolem_aware_vc(&m.inductive_invariant(), &d, &m.vocab, Some(a.name.clone())).unwrap();
        assert!(vc.is_complete());
        let sk_p = Sym::new("sk_p");
        let delta = &vc.parts.iter().find(|p| p.tag == PartTag::Delta).unwrap().formula;
        let post = &vc.parts.iter().find(|p| p.tag == PartTag::InvPost).unwrap().formula;
        assert!(delta.consts().contains(&sk_p));
        assert!(post.consts().contains(&sk_p));
    }
}
