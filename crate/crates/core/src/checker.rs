//! Checking a program model at a bound: builds the initiation, safety and
//! consecution VCs, runs them through the bounded engine and collects the
//! verdicts, partial models and boundary reports.

use crate::fol::{substitute, Formula, Name, Structure, Sym, SymKind, Term};
use crate::frontend::{desugar, validate, DesugarError, ProgramModel};
use crate::horizon::{self, solve_bounded, BoundedOutcome, Encoding, HorizonError, HorizonOptions};
use crate::models::{classify_boundary, quotient_model, BoundaryReport, PartialModel};
use crate::solver::{SmtLimits, SmtSolver, Verdict};
use crate::vcgen::{
    consecution_vc, delta_of_action, delta_of_program, initiation_vc, safety_vc, skolem_aware_vc,
    uses_skolem_names, VcError, VcKind, VerificationCondition,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;
use web_time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Vc(#[from] VcError),
    #[error(transparent)]
    Desugar(#[from] DesugarError),
    #[error(transparent)]
    Horizon(#[from] HorizonError),
    #[error("no action named `{0}`")]
    UnknownAction(String),
    #[error("bad sweep range {0}..{1}")]
    Range(usize, usize),
    #[error("ill-formed model:\n{0}")]
    IllFormed(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum CheckVerdict {
    Proved,
    Unknown,
    IllFormed,
    Resource,
}

impl CheckVerdict {
    pub fn exit_code(self) -> i32 {
        match self {
            CheckVerdict::Proved => 0,
            CheckVerdict::Unknown => 1,
            CheckVerdict::IllFormed => 2,
            CheckVerdict::Resource => 3,
        }
    }
}

impl fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckVerdict::Proved => "PROVED",
            CheckVerdict::Unknown => "UNKNOWN",
            CheckVerdict::IllFormed => "ILL-FORMED",
            CheckVerdict::Resource => "RESOURCE",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub bound: usize,
    pub encoding: Encoding,
    pub timeout: Option<Duration>,
    pub instance_limit: usize,
    /// Restrict consecution to one action.
    pub action: Option<String>,
    /// One consecution VC over the disjunction of all actions.
    pub whole_delta: bool,
    /// Use the Skolemization-aware VC for actions mentioning `sk_` names.
    pub skolem_aware: bool,
    pub jobs: Option<usize>,
    pub eager: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            bound: 1,
            encoding: Encoding::Enumerate,
            timeout: Some(Duration::from_secs(60)),
            instance_limit: 1_000_000,
            action: None,
            whole_delta: false,
            skolem_aware: true,
            jobs: None,
            eager: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VcReport {
    pub kind: VcKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub verdict: CheckVerdict,
    /// The VC is over a relational vocabulary, so the bound is irrelevant.
    pub complete: bool,
    pub instances: usize,
    pub terms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial_model: Option<PartialModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryReport>,
    /// Wall-clock time; left out of JSON so output stays reproducible.
    #[serde(skip)]
    pub millis: u128,
}

impl VcReport {
    pub fn name(&self) -> String {
        match &self.action {
            Some(a) => format!("{}[{a}]", self.kind),
            None => self.kind.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckReport {
    pub schema: String,
    pub bound: usize,
    pub encoding: Encoding,
    pub verdict: CheckVerdict,
    pub vcs: Vec<VcReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub diagnostics: Vec<String>,
}

impl CheckReport {
    pub fn vc(&self, kind: VcKind, action: Option<&str>) -> Option<&VcReport> {
        self.vcs.iter().find(|r| r.kind == kind && r.action.as_deref() == action)
    }

    /// The first partial model, if any VC was not proved.
    pub fn partial_model(&self) -> Option<(&PartialModel, Option<&BoundaryReport>)> {
        self.vcs.iter().find_map(|r| r.partial_model.as_ref().map(|m| (m, r.boundary.as_ref())))
    }

    fn ill_formed(bound: usize, encoding: Encoding, diagnostics: Vec<String>) -> CheckReport {
        CheckReport {
            schema: crate::models::MODEL_SCHEMA.into(),
            bound,
            encoding,
            verdict: CheckVerdict::IllFormed,
            vcs: vec![],
            diagnostics,
        }
    }
}

pub fn aggregate(vs: impl IntoIterator<Item = CheckVerdict>) -> CheckVerdict {
    let vs: Vec<CheckVerdict> = vs.into_iter().collect();
    if vs.contains(&CheckVerdict::IllFormed) {
        CheckVerdict::IllFormed
    } else if vs.contains(&CheckVerdict::Unknown) {
        CheckVerdict::Unknown
    } else if vs.contains(&CheckVerdict::Resource) {
        CheckVerdict::Resource
    } else {
        CheckVerdict::Proved
    }
}

/// Builds the VCs of a desugared model in report order.
pub fn build_vcs(m: &ProgramModel, opts: &CheckOptions) -> Result<Vec<VerificationCondition>, CheckError> {
    let inv = m.inductive_invariant();
    let axiom = m.axiom();
    let mut out = Vec::new();
    if opts.action.is_none() {
        out.push(initiation_vc(&m.init(), &inv, &axiom, &m.vocab));
        out.push(safety_vc(&inv, &m.safety_property(), &axiom, &m.vocab));
    }
    if opts.whole_delta {
        let tr = delta_of_program(m)?;
        let sk = opts.skolem_aware && m.actions.iter().any(uses_skolem_names);
        out.push(consecution(&inv, &tr.delta, m, None, sk)?);
    } else {
        let actions: Vec<_> = match &opts.action {
            Some(n) => vec![m.action(n).ok_or_else(|| CheckError::UnknownAction(n.clone()))?],
            None => m.actions.iter().collect(),
        };
        for a in actions {
            let d = delta_of_action(m, a)?;
            let sk = opts.skolem_aware && uses_skolem_names(a);
            out.push(consecution(&inv, &d, m, Some(a.name.clone()), sk)?);
        }
    }
    Ok(out)
}

fn consecution(
    inv: &Formula,
    delta: &Formula,
    m: &ProgramModel,
    action: Option<String>,
    skolem: bool,
) -> Result<VerificationCondition, CheckError> {
    if skolem {
        match skolem_aware_vc(inv, delta, &m.vocab, action.clone()) {
            Ok(vc) => return Ok(vc),
            Err(VcError::NotUniversal(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(consecution_vc(inv, delta, &m.vocab, action)?)
}

/// Invariant and safety conjuncts with display labels, for boundary reports.
fn labelled_conjuncts(m: &ProgramModel) -> Vec<(String, Formula)> {
    m.invariants
        .iter()
        .chain(&m.safety)
        .enumerate()
        .map(|(i, d)| (d.label.clone().unwrap_or_else(|| format!("conjunct_{i}")), d.formula.clone()))
        .collect()
}

fn run_vc(vc: &VerificationCondition, m: &ProgramModel, opts: &CheckOptions) -> VcReport {
    let start = Instant::now();
    let hopts = HorizonOptions {
        bound: opts.bound,
        encoding: opts.encoding,
        instance_limit: opts.instance_limit,
        timeout: opts.timeout,
        eager: opts.eager,
    };
    let mut r = VcReport {
        kind: vc.kind,
        action: vc.action.clone(),
        verdict: CheckVerdict::Proved,
        complete: vc.is_complete(),
        instances: 0,
        terms: 0,
        reason: None,
        partial_model: None,
        boundary: None,
        millis: 0,
    };
    match solve_bounded(vc, &hopts) {
        Err(e) => {
            r.verdict = CheckVerdict::IllFormed;
            r.reason = Some(e.to_string());
        }
        Ok((out, stats)) => {
            r.instances = stats.instances;
            r.terms = stats.terms;
            match out {
                BoundedOutcome::Unsat => {}
                BoundedOutcome::Resource(why) => {
                    r.verdict = CheckVerdict::Resource;
                    r.reason = Some(why);
                }
                BoundedOutcome::Sat { model, instances } => {
                    r.verdict = CheckVerdict::Unknown;
                    match quotient_model(&model, &instances, vc, opts.bound) {
                        Ok(pm) => {
                            r.boundary = classify_boundary(&labelled_conjuncts(m), &pm, &vc.vocab).ok();
                            r.partial_model = Some(pm);
                        }
                        Err(e) => r.reason = Some(e.to_string()),
                    }
                }
            }
        }
    }
    r.millis = start.elapsed().as_millis();
    r
}

fn run_all(vcs: &[VerificationCondition], m: &ProgramModel, opts: &CheckOptions) -> Result<Vec<VcReport>, CheckError> {
    let go = || vcs.par_iter().map(|vc| run_vc(vc, m, opts)).collect::<Vec<_>>();
    let mut reports = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CheckError::Pool(e.to_string()))?
            .install(go),
        None => go(),
    };
    reports.sort_by(|a, b| (&a.action, a.kind).cmp(&(&b.action, b.kind)));
    Ok(reports)
}

fn prepare(m: &ProgramModel) -> Result<ProgramModel, Vec<String>> {
    let diags = validate(m);
    if !diags.is_empty() {
        return Err(diags.iter().map(|d| d.to_string()).collect());
    }
    if m.desugared {
        Ok(m.clone())
    } else {
        desugar(m).map_err(|e| vec![e.to_string()])
    }
}

/// Checks all VCs of `m` at `opts.bound`. Validation problems produce an
/// ILL-FORMED report; option errors are returned.
pub fn check(m: &ProgramModel, opts: &CheckOptions) -> Result<CheckReport, CheckError> {
    if opts.encoding == Encoding::Guard && opts.bound != 1 {
        return Err(HorizonError::GuardBound.into());
    }
    let m = match prepare(m) {
        Ok(m) => m,
        Err(d) => return Ok(CheckReport::ill_formed(opts.bound, opts.encoding, d)),
    };
    let vcs = build_vcs(&m, opts)?;
    let vcs_reports = run_all(&vcs, &m, opts)?;
    Ok(CheckReport {
        schema: crate::models::MODEL_SCHEMA.into(),
        bound: opts.bound,
        encoding: opts.encoding,
        verdict: aggregate(vcs_reports.iter().map(|r| r.verdict)),
        vcs: vcs_reports,
        diagnostics: vec![],
    })
}

/// One report per bound in `kmin..=kmax`.
pub fn sweep(m: &ProgramModel, kmin: usize, kmax: usize, opts: &CheckOptions) -> Result<Vec<CheckReport>, CheckError> {
    if kmin > kmax {
        return Err(CheckError::Range(kmin, kmax));
    }
    (kmin..=kmax)
        .map(|k| check(m, &CheckOptions { bound: k, ..opts.clone() }))
        .collect()
}

/// Smallest bound of a sweep at which each VC was proved.
pub fn minimal_proved_bounds(reports: &[CheckReport]) -> BTreeMap<String, Option<usize>> {
    let mut out = BTreeMap::new();
    for rep in reports {
        for r in &rep.vcs {
            let e = out.entry(r.name()).or_insert(None);
            if e.is_none() && r.verdict == CheckVerdict::Proved {
                *e = Some(rep.bound);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FiniteSearch {
    Found(Structure),
    None,
    Resource,
}

/// Searches for a model of the VC with exactly `size` elements by grounding
/// every quantifier over fresh distinct element constants. A model found is
/// re-checked by direct evaluation.
pub fn find_finite_model(vc: &VerificationCondition, size: usize, limits: &SmtLimits) -> FiniteSearch {
    let elems: Vec<Term> = (0..size).map(|i| Term::Const(Sym::new(&format!("fm_e{i}")))).collect();
    let mut s = SmtSolver::new();
    for i in 0..size {
        for j in i + 1..size {
            s.add(&Formula::not(Formula::Eq(elems[i].clone(), elems[j].clone())));
        }
    }
    for (sym, kind) in vc.vocab.iter() {
        match kind {
            SymKind::Const => {
                let c = Term::Const(sym.clone());
                s.add(&Formula::or(elems.iter().map(|e| Formula::Eq(c.clone(), e.clone())).collect()));
            }
            SymKind::Func(a) => {
                for args in tuples(&elems, a) {
                    let t = Term::App(sym.clone(), args);
                    s.add(&Formula::or(elems.iter().map(|e| Formula::Eq(t.clone(), e.clone())).collect()));
                }
            }
            SymKind::Rel(_) => {}
        }
    }
    for p in &vc.parts {
        s.add(&expand(&p.formula, &elems));
    }
    match s.check(limits) {
        Verdict::Unsat => FiniteSearch::None,
        Verdict::Resource => FiniteSearch::Resource,
        Verdict::Sat(gm) => {
            let idx: BTreeMap<usize, usize> = elems.iter().enumerate().map(|(i, e)| (gm.class_of[e], i)).collect();
            let mut st = Structure::empty(&vc.vocab, size);
            for (t, c) in &gm.class_of {
                if let Term::Const(sym) = t {
                    if vc.vocab.get(sym) == Some(SymKind::Const) {
                        st.consts.insert(sym.clone(), idx[c]);
                    }
                }
            }
            for ((r, args), v) in &gm.rel_table {
                if vc.vocab.contains(r) {
                    st.set_rel(r, &args.iter().map(|a| idx[a]).collect::<Vec<_>>(), *v);
                }
            }
            for ((f, args), v) in &gm.func_table {
                st.set_func(f, &args.iter().map(|a| idx[a]).collect::<Vec<_>>(), idx[v]);
            }
            assert!(
                vc.parts.iter().all(|p| st.eval(&p.formula) == Ok(true)),
                "finite model of {} fails direct evaluation",
                vc.name()
            );
            FiniteSearch::Found(st)
        }
    }
}

fn tuples(elems: &[Term], n: usize) -> Vec<Vec<Term>> {
    use itertools::Itertools;
    if n == 0 {
        return vec![vec![]];
    }
    (0..n).map(|_| elems.iter().cloned()).multi_cartesian_product().collect()
}

fn expand(f: &Formula, elems: &[Term]) -> Formula {
    match f {
        Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
            let body = expand(g, elems);
            let inst: Vec<Formula> = tuples(elems, vs.len())
                .into_iter()
                .map(|tup| {
                    let map: BTreeMap<Name, Term> = vs.iter().cloned().zip(tup).collect();
                    substitute(&body, &map)
                })
                .collect();
            if matches!(f, Formula::Forall(..)) {
                Formula::and(inst)
            } else {
                Formula::or(inst)
            }
        }
        Formula::Not(g) => Formula::not(expand(g, elems)),
        Formula::And(gs) => Formula::and(gs.iter().map(|g| expand(g, elems)).collect()),
        Formula::Or(gs) => Formula::or(gs.iter().map(|g| expand(g, elems)).collect()),
        Formula::Implies(a, b) => Formula::implies(expand(a, elems), expand(b, elems)),
        Formula::Iff(a, b) => Formula::iff(expand(a, elems), expand(b, elems)),
        _ => f.clone(),
    }
}

/// Constants of the VC vocabulary, Skolem constants included. For a VC over
/// a relational vocabulary every model has a submodel of at most this size.
pub fn small_model_bound(vc: &VerificationCondition) -> usize {
    vc.vocab.consts().len()
}

/// SMT-LIB scripts of the bounded instantiation set of every VC, separated
/// by `(reset)`.
pub fn export_ground(m: &ProgramModel, opts: &CheckOptions) -> Result<String, CheckError> {
    let m = match prepare(m) {
        Ok(m) => m,
        Err(d) => return Err(CheckError::IllFormed(d.join("\n"))),
    };
    let mut out = String::new();
    for (i, vc) in build_vcs(&m, opts)?.iter().enumerate() {
        let set = match opts.encoding {
            Encoding::Enumerate => horizon::bounded_instantiation_set(vc, opts.bound, opts.instance_limit)?,
            Encoding::Approx => horizon::approx_instantiation_set(vc, opts.bound, opts.instance_limit)?,
            Encoding::Guard => {
                if opts.bound != 1 {
                    return Err(HorizonError::GuardBound.into());
                }
                horizon::guard_instantiation_set(vc, opts.instance_limit)?
            }
        };
        let vocab = horizon::problem_vocab(vc, &horizon::prepare(vc, opts.bound, opts.encoding)?);
        if i > 0 {
            out.push_str("(reset)\n");
        }
        out.push_str(&format!("; {} at bound {} ({})\n", vc.name(), opts.bound, opts.encoding));
        out.push_str(&horizon::to_smtlib(&vocab, &set.sentences()));
    }
    Ok(out)
}
