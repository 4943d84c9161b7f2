use crate::fol::{Formula, Sym, SymKind, Term, Vocabulary};
use std::fmt::Write;

fn sym(s: &Sym) -> String {
    if s.primed {
        format!("|{}'|", s.name)
    } else {
        format!("|{}|", s.name)
    }
}

fn term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.to_string(),
        Term::Const(c) => sym(c),
        Term::App(f, args) => {
            let a: Vec<String> = args.iter().map(term).collect();
            format!("({} {})", sym(f), a.join(" "))
        }
    }
}

fn formula(f: &Formula) -> String {
    let many = |op: &str, gs: &[Formula]| {
        let a: Vec<String> = gs.iter().map(formula).collect();
        format!("({op} {})", a.join(" "))
    };
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Atom(r, args) if args.is_empty() => sym(r),
        Formula::Atom(r, args) => {
            let a: Vec<String> = args.iter().map(term).collect();
            format!("({} {})", sym(r), a.join(" "))
        }
        Formula::Eq(a, b) => format!("(= {} {})", term(a), term(b)),
        Formula::Not(g) => format!("(not {})", formula(g)),
        Formula::And(gs) => many("and", gs),
        Formula::Or(gs) => many("or", gs),
        Formula::Implies(a, b) => format!("(=> {} {})", formula(a), formula(b)),
        Formula::Iff(a, b) => format!("(= {} {})", formula(a), formula(b)),
        Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
            let q = if matches!(f, Formula::Forall(..)) { "forall" } else { "exists" };
            let bs: Vec<String> = vs.iter().map(|v| format!("({v} U)")).collect();
            format!("({q} ({}) {})", bs.join(" "), formula(g))
        }
    }
}

/// Renders ground sentences as an SMT-LIB 2 script over one sort `U`.
pub fn to_smtlib(vocab: &Vocabulary, sentences: &[Formula]) -> String {
    let mut out = String::from("(set-logic QF_UF)\n(declare-sort U 0)\n");
    for (s, k) in vocab.iter() {
        let _ = match k {
            SymKind::Const => writeln!(out, "(declare-fun {} () U)", sym(s)),
            SymKind::Rel(a) => writeln!(out, "(declare-fun {} ({}) Bool)", sym(s), vec!["U"; a].join(" ")),
            SymKind::Func(a) => writeln!(out, "(declare-fun {} ({}) U)", sym(s), vec!["U"; a].join(" ")),
        };
    }
    for f in sentences {
        let _ = writeln!(out, "(assert {})", formula(f));
    }
    out.push_str("(check-sat)\n");
    out
}
