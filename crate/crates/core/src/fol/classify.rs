use super::{nnf, Formula};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Quantifier classes, ordered from most to least precise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuantClass {
    QF,
    Universal,
    Existential,
    AF,
    EPR,
    AE,
    OneAlternation,
    Other,
}

impl fmt::Display for QuantClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QuantClass::QF => "QF",
            QuantClass::Universal => "Universal",
            QuantClass::Existential => "Existential",
            QuantClass::AF => "AF",
            QuantClass::EPR => "EPR",
            QuantClass::AE => "AE",
            QuantClass::OneAlternation => "OneAlternation",
            QuantClass::Other => "Other",
        };
        f.write_str(s)
    }
}

/// Quantifier shape of an NNF formula.
#[derive(Default, Clone, Copy)]
struct Shape {
    has_all: bool,
    has_ex: bool,
    /// some ∃ occurs below a ∀
    ex_under_all: bool,
    /// some ∀ occurs below an ∃
    all_under_ex: bool,
    /// maximal number of alternations along a path
    alternations: usize,
}

fn shape(f: &Formula) -> Shape {
    match f {
        Formula::Forall(_, g) | Formula::Exists(_, g) => {
            let mut s = shape(g);
            if matches!(f, Formula::Forall(..)) {
                s.ex_under_all |= s.has_ex;
                s.has_all = true;
            } else {
                s.all_under_ex |= s.has_all;
                s.has_ex = true;
            }
            s
        }
        Formula::And(gs) | Formula::Or(gs) => {
            let mut s = Shape::default();
            for g in gs {
                let t = shape(g);
                s.has_all |= t.has_all;
                s.has_ex |= t.has_ex;
                s.ex_under_all |= t.ex_under_all;
                s.all_under_ex |= t.all_under_ex;
            }
            s
        }
        Formula::Not(g) => shape(g),
        _ => Shape::default(),
    }
}

fn max_path_alternations_above(f: &Formula) -> usize {
    fn rec(f: &Formula, above: Option<bool>, alts: usize) -> usize {
        match f {
            Formula::Forall(_, g) | Formula::Exists(_, g) => {
                let is_all = matches!(f, Formula::Forall(..));
                let alts = match above {
                    Some(a) if a != is_all => alts + 1,
                    _ => alts,
                };
                rec(g, Some(is_all), alts)
            }
            Formula::And(gs) | Formula::Or(gs) => gs.iter().map(|g| rec(g, above, alts)).max().unwrap_or(alts),
            Formula::Not(g) => rec(g, above, alts),
            _ => alts,
        }
    }
    rec(f, None, 0)
}

fn nnf_shape(f: &Formula) -> Shape {
    let g = nnf(f);
    let mut s = shape(&g);
    s.alternations = max_path_alternations_above(&g);
    s
}

pub fn is_universal(f: &Formula) -> bool {
    !nnf_shape(f).has_ex
}

pub fn is_existential(f: &Formula) -> bool {
    !nnf_shape(f).has_all
}

/// Boolean combination of universal and existential formulas.
pub fn is_af(f: &Formula) -> bool {
    let s = nnf_shape(f);
    !s.ex_under_all && !s.all_under_ex
}

/// ∃*∀* after prenexing, over a relational vocabulary.
pub fn is_epr(f: &Formula) -> bool {
    !f.has_function_app() && !nnf_shape(f).ex_under_all
}

/// ∀*∃* after prenexing.
pub fn is_ae(f: &Formula) -> bool {
    !nnf_shape(f).all_under_ex
}

/// Boolean combination of ∀*∃* formulas: at most one alternation on any path.
pub fn is_one_alternation(f: &Formula) -> bool {
    nnf_shape(f).alternations <= 1
}

/// The most precise class that applies.
pub fn classify(f: &Formula) -> QuantClass {
    let s = nnf_shape(f);
    if !s.has_all && !s.has_ex {
        QuantClass::QF
    } else if !s.has_ex {
        QuantClass::Universal
    } else if !s.has_all {
        QuantClass::Existential
    } else if !s.ex_under_all && !s.all_under_ex {
        QuantClass::AF
    } else if !s.ex_under_all && !f.has_function_app() {
        QuantClass::EPR
    } else if !s.all_under_ex {
        QuantClass::AE
    } else if s.alternations <= 1 {
        QuantClass::OneAlternation
    } else {
        QuantClass::Other
    }
}
