//! Partial models read off satisfiable bounded instantiation sets, and the
//! boundary classification of AE invariant conjuncts.

use crate::fol::{pnf, EvalError, Formula, Name, Structure, Sym, SymKind, Term, Vocabulary};
use crate::solver::{GroundModel, ModelError};
use crate::vcgen::VerificationCondition;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelsError {
    #[error("model does not satisfy instance `{0}`")]
    Replay(String),
    #[error(transparent)]
    Ground(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub name: String,
    /// Ground terms of the class, shallowest first.
    pub terms: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelTable {
    pub relation: String,
    pub arity: usize,
    /// Tuples of element names on which the relation holds.
    pub tuples: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuncEntry {
    pub function: String,
    pub args: Vec<String>,
    pub value: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelLabel {
    /// The full Skolemized VC holds in the finite completed structure.
    Counterexample,
    PartialModel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialModel {
    pub bound: usize,
    pub label: ModelLabel,
    pub elements: Vec<Element>,
    /// Constant (program variable or Skolem constant) to element.
    pub constants: BTreeMap<String, String>,
    pub functions: Vec<FuncEntry>,
    /// Value of every function entry the model leaves open.
    pub default_element: String,
    pub pre_state: Vec<RelTable>,
    pub post_state: Vec<RelTable>,
}

impl PartialModel {
    pub fn label_text(&self) -> String {
        match self.label {
            ModelLabel::Counterexample => "counterexample".into(),
            ModelLabel::PartialModel => format!("partial model (bound {})", self.bound),
        }
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.elements.iter().enumerate().map(|(i, e)| (e.name.as_str(), i)).collect()
    }

    /// The finite structure over `vocab`: relations are false and functions
    /// map to the default element wherever the model leaves them open. Symbols of `vocab`
    /// the model does not mention get those defaults too.
    pub fn structure(&self, vocab: &Vocabulary) -> Result<Structure, ModelsError> {
        let idx = self.index();
        let el = |n: &str| idx.get(n).copied().ok_or_else(|| ModelsError::UnknownElement(n.to_string()));
        let mut s = Structure::empty(vocab, self.elements.len().max(1));
        let d = el(&self.default_element)?;
        for (_, (_, table)) in s.funcs.iter_mut() {
            table.iter_mut().for_each(|v| *v = d);
        }
        for (c, e) in &self.constants {
            let sym = parse_sym(c);
            if vocab.get(&sym) == Some(SymKind::Const) {
                s.consts.insert(sym, el(e)?);
            }
        }
        for t in self.pre_state.iter().chain(&self.post_state) {
            let sym = parse_sym(&t.relation);
            if !matches!(vocab.get(&sym), Some(SymKind::Rel(_))) {
                continue;
            }
            for tup in &t.tuples {
                let args = tup.iter().map(|n| el(n)).collect::<Result<Vec<_>, _>>()?;
                s.set_rel(&sym, &args, true);
            }
        }
        for f in &self.functions {
            let sym = parse_sym(&f.function);
            if !matches!(vocab.get(&sym), Some(SymKind::Func(_))) {
                continue;
            }
            let args = f.args.iter().map(|n| el(n)).collect::<Result<Vec<_>, _>>()?;
            s.set_func(&sym, &args, el(&f.value)?);
        }
        Ok(s)
    }
}

fn parse_sym(s: &str) -> Sym {
    match s.strip_suffix('\'') {
        Some(b) => Sym::primed(b),
        None => Sym::new(s),
    }
}

fn is_internal(s: &Sym) -> bool {
    s.name.starts_with("sk_def_")
}

/// Quotient of a ground model: one element per congruence class, ordered
/// by the class's shallowest term. Every instance is replayed first.
pub fn quotient_model(
    model: &GroundModel,
    instances: &[Formula],
    vc: &VerificationCondition,
    bound: usize,
) -> Result<PartialModel, ModelsError> {
    for f in instances {
        if !model.eval(f)? {
            return Err(ModelsError::Replay(f.to_string()));
        }
    }
    let key = |t: &Term| (t.depth(), t.to_string());
    let mut order: Vec<usize> = (0..model.num_classes()).collect();
    let first: Vec<(usize, String)> =
        model.classes.iter().map(|c| c.iter().map(key).min().unwrap_or((usize::MAX, String::new()))).collect();
    order.sort_by(|a, b| first[*a].cmp(&first[*b]));
    let mut name_of = vec![String::new(); model.num_classes()];
    let mut elements = Vec::new();
    for (i, &c) in order.iter().enumerate() {
        name_of[c] = format!("e{i}");
        let mut ts: Vec<&Term> = model.classes[c].iter().collect();
        ts.sort_by_key(|t| key(t));
        elements.push(Element { name: format!("e{i}"), terms: ts.iter().map(|t| t.to_string()).collect() });
    }
    let mut constants = BTreeMap::new();
    for (t, &c) in &model.class_of {
        if let Term::Const(s) = t {
            constants.insert(s.to_string(), name_of[c].clone());
        }
    }
    let mut functions: Vec<FuncEntry> = model
        .func_table
        .iter()
        .map(|((f, args), &v)| FuncEntry {
            function: f.to_string(),
            args: args.iter().map(|a| name_of[*a].clone()).collect(),
            value: name_of[v].clone(),
        })
        .collect();
    functions.sort_by(|a, b| (&a.function, &a.args).cmp(&(&b.function, &b.args)));
    let mut pre_state = Vec::new();
    let mut post_state = Vec::new();
    for (r, arity) in vc.vocab.rels() {
        if is_internal(&r) {
            continue;
        }
        let mut tuples: Vec<Vec<String>> = model
            .rel_table
            .iter()
            .filter(|((s, _), &v)| *s == r && v)
            .map(|((_, args), _)| args.iter().map(|a| name_of[*a].clone()).collect())
            .collect();
        tuples.sort();
        tuples.dedup();
        let t = RelTable { relation: r.to_string(), arity, tuples };
        if r.primed {
            post_state.push(t);
        } else {
            pre_state.push(t);
        }
    }
    let mut pm = PartialModel {
        bound,
        label: ModelLabel::PartialModel,
        elements,
        constants,
        functions,
        default_element: name_of.first().cloned().unwrap_or_else(|| "e0".into()),
        pre_state,
        post_state,
    };
    if full_vc_holds(&pm, vc) {
        pm.label = ModelLabel::Counterexample;
    }
    Ok(pm)
}

const EVAL_BUDGET: u128 = 2_000_000;

/// Whether every Skolemized part of the VC holds in the completed finite
/// structure; `false` when the evaluation would be too large.
fn full_vc_holds(pm: &PartialModel, vc: &VerificationCondition) -> bool {
    let n = pm.elements.len().max(1) as u128;
    let f = vc.formula();
    let width = max_quantifier_nesting(&f);
    if n.saturating_pow(width as u32) > EVAL_BUDGET {
        return false;
    }
    match pm.structure(&vc.vocab) {
        Ok(s) => vc.parts.iter().all(|p| s.eval(&p.formula).unwrap_or(false)),
        Err(_) => false,
    }
}

fn max_quantifier_nesting(f: &Formula) -> usize {
    match f {
        Formula::Forall(vs, g) | Formula::Exists(vs, g) => vs.len() + max_quantifier_nesting(g),
        Formula::Not(g) => max_quantifier_nesting(g),
        Formula::And(gs) | Formula::Or(gs) => gs.iter().map(max_quantifier_nesting).max().unwrap_or(0),
        Formula::Implies(a, b) | Formula::Iff(a, b) => max_quantifier_nesting(a).max(max_quantifier_nesting(b)),
        _ => 0,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEntry {
    pub conjunct: String,
    pub inside: Vec<String>,
    pub outside: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub entries: Vec<BoundaryEntry>,
    /// Conjuncts without exactly one leading universal.
    pub skipped: Vec<String>,
}

/// Splits the elements by whether the existential part of each
/// single-universal conjunct holds of them in the pre-state.
pub fn classify_boundary(
    conjuncts: &[(String, Formula)],
    m: &PartialModel,
    vocab: &Vocabulary,
) -> Result<BoundaryReport, ModelsError> {
    let s = m.structure(vocab)?;
    let mut out = BoundaryReport::default();
    for (label, f) in conjuncts {
        let p = pnf(f);
        let (x, body): (Name, Formula) = match &p {
            Formula::Forall(vs, b) if vs.len() == 1 && is_exists_qf(b) => (vs[0].clone(), (**b).clone()),
            _ => {
                out.skipped.push(format!("{label}: no single leading universal"));
                continue;
            }
        };
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for (i, e) in m.elements.iter().enumerate() {
            let mut env = vec![(x.clone(), i)];
            if s.eval_in(&body, &mut env)? {
                inside.push(e.name.clone());
            } else {
                outside.push(e.name.clone());
            }
        }
        out.entries.push(BoundaryEntry { conjunct: label.clone(), inside, outside });
    }
    Ok(out)
}

fn is_exists_qf(f: &Formula) -> bool {
    match f {
        Formula::Exists(_, g) => g.is_quantifier_free(),
        g => g.is_quantifier_free(),
    }
}

pub fn render_text(m: &PartialModel, boundary: Option<&BoundaryReport>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} with {} elements", m.label_text(), m.elements.len());
    for e in &m.elements {
        let _ = writeln!(out, "  {}: {}", e.name, e.terms.join(", "));
    }
    if !m.constants.is_empty() {
        out.push_str("constants:\n");
        for (c, e) in &m.constants {
            let _ = writeln!(out, "  {c} = {e}");
        }
    }
    for (title, tables) in [("pre-state", &m.pre_state), ("post-state", &m.post_state)] {
        if tables.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{title}:");
        for t in tables.iter() {
            let tuples: Vec<String> = t.tuples.iter().map(|tp| format!("({})", tp.join(", "))).collect();
            let body = if t.arity == 0 {
                (!t.tuples.is_empty()).to_string()
            } else {
                format!("{{{}}}", tuples.join(", "))
            };
            let _ = writeln!(out, "  {} = {body}", t.relation);
        }
    }
    if !m.functions.is_empty() {
        out.push_str("functions:\n");
        for f in &m.functions {
            let _ = writeln!(out, "  {}({}) = {}", f.function, f.args.join(", "), f.value);
        }
    }
    if let Some(b) = boundary {
        out.push_str("boundary:\n");
        for e in &b.entries {
            let _ = writeln!(out, "  {}: inside {{{}}} outside {{{}}}", e.conjunct, e.inside.join(", "), e.outside.join(", "));
        }
        for s in &b.skipped {
            let _ = writeln!(out, "  skipped {s}");
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    schema: String,
    model: PartialModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary: Option<BoundaryReport>,
}

pub const MODEL_SCHEMA: &str = "bhz-model/1";

pub fn render_json(m: &PartialModel, boundary: Option<&BoundaryReport>) -> String {
    let doc = ModelDoc { schema: MODEL_SCHEMA.into(), model: m.clone(), boundary: boundary.cloned() };
    serde_json::to_string_pretty(&doc).expect("serializable")
}

pub fn parse_json(s: &str) -> Result<(PartialModel, Option<BoundaryReport>), serde_json::Error> {
    let doc: ModelDoc = serde_json::from_str(s)?;
    Ok((doc.model, doc.boundary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> PartialModel {
        PartialModel {
            bound: 1,
            label: ModelLabel::PartialModel,
            elements: vec![
                Element { name: "e0".into(), terms: vec!["a".into()] },
                Element { name: "e1".into(), terms: vec!["b".into()] },
            ],
            constants: [("a".to_string(), "e0".to_string()), ("b".to_string(), "e1".to_string())].into(),
            functions: vec![],
            default_element: "e0".into(),
            pre_state: vec![RelTable { relation: "r".into(), arity: 1, tuples: vec![vec!["e0".into()]] }],
            post_state: vec![],
        }
    }

    #[test]
    fn json_round_trip() {
        let m = two_node();
        let b = BoundaryReport {
            entries: vec![BoundaryEntry { conjunct: "c".into(), inside: vec!["e0".into()], outside: vec!["e1".into()] }],
            skipped: vec![],
        };
        let (m2, b2) = parse_json(&render_json(&m, Some(&b))).unwrap();
        assert_eq!(m2, m);
        assert_eq!(b2, Some(b));
    }

    #[test]
    fn golden_text() {
        let want = "partial model (bound 1) with 2 elements\n  e0: a\n  e1: b\nconstants:\n  a = e0\n  b = e1\npre-state:\n  r = {(e0)}\n";
        assert_eq!(render_text(&two_node(), None), want);
    }

    #[test]
    fn boundary_of_universal_conjunct() {
        let m = two_node();
        let mut v = Vocabulary::new();
        v.add(Sym::new("r"), SymKind::Rel(1)).unwrap();
        v.add(Sym::new("a"), SymKind::Const).unwrap();
        v.add(Sym::new("b"), SymKind::Const).unwrap();
        let f = Formula::forall(vec![crate::fol::name("x")], Formula::atom("r", vec![Term::var("x")]));
        let rep = classify_boundary(&[("all_r".into(), f.clone())], &m, &v).unwrap();
        assert_eq!(rep.entries[0].inside, vec!["e0"]);
        assert_eq!(rep.entries[0].outside, vec!["e1"]);
        let two = Formula::forall(vec![crate::fol::name("x"), crate::fol::name("y")], Formula::eq(Term::var("x"), Term::var("y")));
        let rep = classify_boundary(&[("two".into(), two)], &m, &v).unwrap();
        assert!(rep.entries.is_empty());
        assert_eq!(rep.skipped.len(), 1);
    }
}
