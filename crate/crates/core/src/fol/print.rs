//! Fully parenthesized infix syntax accepted back by the frontend parser.

use super::{Formula, Term};
use std::fmt;

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::App(g, args) => {
                write!(f, "{g}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, parts: &[Formula], op: &str) -> fmt::Result {
    write!(f, "(")?;
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            write!(f, " {op} ")?;
        }
        write!(f, "{p}")?;
    }
    write!(f, ")")
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(r, args) => {
                if args.is_empty() {
                    write!(f, "{r}")
                } else {
                    write!(f, "{}", Term::App(r.clone(), args.clone()))
                }
            }
            Formula::Eq(a, b) => write!(f, "({a} = {b})"),
            Formula::Not(g) => write!(f, "~{g}"),
            Formula::And(gs) if gs.is_empty() => write!(f, "true"),
            Formula::Or(gs) if gs.is_empty() => write!(f, "false"),
            Formula::And(gs) if gs.len() == 1 => write!(f, "{}", gs[0]),
            Formula::Or(gs) if gs.len() == 1 => write!(f, "{}", gs[0]),
            Formula::And(gs) => join(f, gs, "&"),
            Formula::Or(gs) => join(f, gs, "|"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Iff(a, b) => write!(f, "({a} <-> {b})"),
            Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
                let q = if matches!(self, Formula::Forall(..)) { "forall" } else { "exists" };
                write!(f, "({q} {}. {g})", vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))
            }
        }
    }
}
