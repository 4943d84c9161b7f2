use super::{desugar, is_reserved_prefix, Command, Pos, ProgramModel};
use crate::fol::{is_epr, Formula, Sym, SymKind, Vocabulary};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub pos: Option<Pos>,
    pub context: String,
    pub msg: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pos {
            Some(p) => write!(f, "{p}: {}: {}", self.context, self.msg),
            None => write!(f, "{}: {}", self.context, self.msg),
        }
    }
}

struct V<'a> {
    out: Vec<Diagnostic>,
    pos: Option<Pos>,
    context: String,
    vocab: &'a Vocabulary,
}

impl V<'_> {
    fn diag(&mut self, msg: impl Into<String>) {
        self.out.push(Diagnostic { pos: self.pos, context: self.context.clone(), msg: msg.into() });
    }

    fn symbols(&mut self, f: &Formula, vocab: &Vocabulary) {
        if let Err(e) = vocab.check_formula(f) {
            self.diag(e.to_string());
        }
        if f.rels().iter().chain(f.consts().iter()).any(|s| s.primed) {
            self.diag("primed symbols are not allowed in programs");
        }
        if !f.funcs().is_empty() {
            self.diag("function symbols are not allowed in programs");
        }
    }

    fn sentence(&mut self, f: &Formula, vocab: &Vocabulary) {
        self.symbols(f, vocab);
        let fv = f.free_vars();
        if !fv.is_empty() {
            let names: Vec<String> = fv.iter().map(|v| v.to_string()).collect();
            self.diag(format!("undeclared identifiers {}", names.join(", ")));
        }
    }
}

/// Checks the quantifier-class side conditions of a model. The model is
/// desugared first if needed. Returns no diagnostics iff the model conforms.
pub fn validate(m: &ProgramModel) -> Vec<Diagnostic> {
    let m = if m.desugared {
        m.clone()
    } else {
        match desugar(m) {
            Ok(d) => d,
            Err(e) => return vec![Diagnostic { pos: None, context: "desugar".into(), msg: e.to_string() }],
        }
    };
    let mut v = V { out: Vec::new(), pos: None, context: "vocabulary".into(), vocab: &m.vocab };
    if !m.vocab.is_relational() {
        v.diag("vocabulary must be relational");
    }
    for (s, k) in m.vocab.iter() {
        if s.primed {
            v.diag(format!("primed symbol `{s}` declared"));
        }
        if is_reserved_prefix(&s.name) && !matches!(k, SymKind::Func(_)) {
            v.diag(format!("`{s}` uses a reserved prefix"));
        }
    }
    for (kind, ds) in [("axiom", &m.axioms), ("init", &m.inits), ("invariant", &m.invariants), ("safety", &m.safety)] {
        for d in ds {
            v.pos = Some(d.pos);
            v.context = match &d.label {
                Some(l) => format!("{kind} {l}"),
                None => kind.to_string(),
            };
            v.sentence(&d.formula, &m.vocab);
            if kind == "axiom" && !is_epr(&d.formula) {
                v.diag("axiom must be ∃*∀*");
            }
        }
    }
    for d in &m.derived {
        v.pos = None;
        v.context = format!("derived {}", d.rel);
        let inner = d.def.free_vars();
        if inner.iter().any(|x| !d.params.contains(x)) {
            v.diag("definition has free variables that are not parameters");
        }
        v.symbols(&d.def, &m.vocab);
    }
    for a in &m.actions {
        v.pos = Some(a.pos);
        v.context = format!("action {}", a.name);
        let avocab = m.action_vocab(a);
        for l in &a.locals {
            if m.vocab.contains(&Sym { name: l.clone(), primed: false }) {
                v.diag(format!("local `{l}` shadows a declared symbol"));
            }
        }
        check_cmd(&mut v, &a.body, &avocab);
    }
    v.out
}

fn check_cmd(v: &mut V, c: &Command, vocab: &Vocabulary) {
    match c {
        Command::Skip | Command::Abort => {}
        Command::Update { rel, params, body } => {
            match vocab.get(rel) {
                Some(SymKind::Rel(a)) if a == params.len() => {}
                Some(SymKind::Rel(a)) => v.diag(format!("update of `{rel}` needs {a} parameters")),
                _ => v.diag(format!("update of undeclared relation `{rel}`")),
            }
            if v.vocab.get(rel).is_none() {
                v.diag(format!("`{rel}` is not a state relation"));
            }
            if !body.is_quantifier_free() {
                v.diag(format!("update body of `{rel}` must be quantifier-free"));
            }
            if body.free_vars().iter().any(|x| !params.contains(x)) {
                v.diag(format!("update body of `{rel}` has undeclared identifiers"));
            }
            v.symbols(body, vocab);
        }
        Command::Havoc(s) => {
            if vocab.get(s) != Some(SymKind::Const) {
                v.diag(format!("havoc of `{s}`, which is not a program variable"));
            }
        }
        Command::Assume(f) => {
            v.sentence(f, vocab);
            if !is_epr(f) {
                v.diag("assume must be ∃*∀*");
            }
        }
        Command::Seq(a, b) | Command::Choice(a, b) => {
            check_cmd(v, a, vocab);
            check_cmd(v, b, vocab);
        }
        _ => v.diag("unexpected sugar after desugaring"),
    }
}
