use super::{FolError, Formula, Name, Sym, SymKind, Term, Vocabulary};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// Picks a name based on `base` that is not in `avoid`.
pub(crate) fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit()).trim_end_matches('_');
    let stem = if stem.is_empty() { "v" } else { stem };
    for i in 1.. {
        let cand = format!("{stem}_{i}");
        if !avoid.contains(cand.as_str()) {
            return Arc::from(cand);
        }
    }
    unreachable!()
}

pub(crate) fn all_vars(f: &Formula, out: &mut BTreeSet<Name>) {
    f.visit_terms(&mut |t| t.free_vars_into(out));
    collect_binders(f, out);
}

fn collect_binders(f: &Formula, out: &mut BTreeSet<Name>) {
    match f {
        Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
            out.extend(vs.iter().cloned());
            collect_binders(g, out);
        }
        Formula::Not(g) => collect_binders(g, out),
        Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| collect_binders(g, out)),
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            collect_binders(a, out);
            collect_binders(b, out);
        }
        _ => {}
    }
}

/// Capture-avoiding substitution of terms for free variables.
pub fn substitute(f: &Formula, map: &BTreeMap<Name, Term>) -> Formula {
    if map.is_empty() {
        return f.clone();
    }
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(r, args) => Formula::Atom(r.clone(), args.iter().map(|t| t.subst(map)).collect()),
        Formula::Eq(a, b) => Formula::Eq(a.subst(map), b.subst(map)),
        Formula::Not(g) => Formula::Not(Box::new(substitute(g, map))),
        Formula::And(gs) => Formula::And(gs.iter().map(|g| substitute(g, map)).collect()),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| substitute(g, map)).collect()),
        Formula::Implies(a, b) => Formula::Implies(Box::new(substitute(a, map)), Box::new(substitute(b, map))),
        Formula::Iff(a, b) => Formula::Iff(Box::new(substitute(a, map)), Box::new(substitute(b, map))),
        Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
            let mut inner: BTreeMap<Name, Term> =
                map.iter().filter(|(k, _)| !vs.contains(k)).map(|(k, v)| (k.clone(), v.clone())).collect();
            let body_free = g.free_vars();
            inner.retain(|k, _| body_free.contains(k));
            let mut incoming = BTreeSet::new();
            for t in inner.values() {
                t.free_vars_into(&mut incoming);
            }
            let mut avoid = incoming.clone();
            all_vars(g, &mut avoid);
            avoid.extend(inner.keys().cloned());
            let mut new_vs = Vec::with_capacity(vs.len());
            for v in vs {
                if incoming.contains(v) {
                    let nv = fresh_name(v, &avoid);
                    avoid.insert(nv.clone());
                    inner.insert(v.clone(), Term::Var(nv.clone()));
                    new_vs.push(nv);
                } else {
                    new_vs.push(v.clone());
                }
            }
            let body = substitute(g, &inner);
            match f {
                Formula::Forall(..) => Formula::Forall(new_vs, Box::new(body)),
                _ => Formula::Exists(new_vs, Box::new(body)),
            }
        }
    }
}

/// Replaces every atom `r(t⃗)` by `ψ[t⃗/x⃗]`.
pub fn substitute_relation(f: &Formula, r: &Sym, params: &[Name], psi: &Formula) -> Result<Formula, FolError> {
    let mut err = None;
    let out = f.map_atoms(&mut |a| match a {
        Formula::Atom(s, args) if s == r => {
            if args.len() != params.len() {
                err = Some(FolError::Arity { sym: r.to_string(), expected: params.len(), got: args.len() });
                return a.clone();
            }
            let map: BTreeMap<Name, Term> = params.iter().cloned().zip(args.iter().cloned()).collect();
            substitute(psi, &map)
        }
        _ => a.clone(),
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Primes every constant, relation and function symbol.
pub fn prime(f: &Formula) -> Result<Formula, FolError> {
    if let Some(s) = all_syms(f).into_iter().find(|s| s.primed) {
        return Err(FolError::AlreadyPrimed(s.to_string()));
    }
    Ok(f.map_syms(&mut |s| s.to_primed()))
}

pub fn unprime(f: &Formula) -> Result<Formula, FolError> {
    if let Some(s) = all_syms(f).into_iter().find(|s| !s.primed) {
        return Err(FolError::NotPrimed(s.to_string()));
    }
    Ok(f.map_syms(&mut |s| s.to_unprimed()))
}

fn all_syms(f: &Formula) -> BTreeSet<Sym> {
    let mut out = f.rels();
    out.extend(f.consts());
    out.extend(f.funcs());
    out
}

/// Negation normal form; implications and biconditionals are eliminated.
pub fn nnf(f: &Formula) -> Formula {
    nnf_pol(f, true)
}

fn nnf_pol(f: &Formula, pos: bool) -> Formula {
    match f {
        Formula::True => {
            if pos {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::False => {
            if pos {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::Atom(..) | Formula::Eq(..) => {
            if pos {
                f.clone()
            } else {
                Formula::Not(Box::new(f.clone()))
            }
        }
        Formula::Not(g) => nnf_pol(g, !pos),
        Formula::And(gs) => {
            let parts = gs.iter().map(|g| nnf_pol(g, pos)).collect();
            if pos {
                Formula::and(parts)
            } else {
                Formula::or(parts)
            }
        }
        Formula::Or(gs) => {
            let parts = gs.iter().map(|g| nnf_pol(g, pos)).collect();
            if pos {
                Formula::or(parts)
            } else {
                Formula::and(parts)
            }
        }
        Formula::Implies(a, b) => {
            if pos {
                Formula::or(vec![nnf_pol(a, false), nnf_pol(b, true)])
            } else {
                Formula::and(vec![nnf_pol(a, true), nnf_pol(b, false)])
            }
        }
        Formula::Iff(a, b) => {
            let (ap, an, bp, bn) = (nnf_pol(a, true), nnf_pol(a, false), nnf_pol(b, true), nnf_pol(b, false));
            if pos {
                Formula::or(vec![Formula::and(vec![ap, bp]), Formula::and(vec![an, bn])])
            } else {
                Formula::or(vec![Formula::and(vec![ap, bn]), Formula::and(vec![an, bp])])
            }
        }
        Formula::Forall(vs, g) => {
            let body = nnf_pol(g, pos);
            if pos {
                Formula::forall(vs.clone(), body)
            } else {
                Formula::exists(vs.clone(), body)
            }
        }
        Formula::Exists(vs, g) => {
            let body = nnf_pol(g, pos);
            if pos {
                Formula::exists(vs.clone(), body)
            } else {
                Formula::forall(vs.clone(), body)
            }
        }
    }
}

/// Renames bound variables so that every binder is distinct and no bound
/// variable shares a name with a free one. Names already unique are kept.
pub fn rename_apart(f: &Formula) -> Formula {
    let mut used: BTreeSet<Name> = f.free_vars();
    rename_rec(f, &mut used, &BTreeMap::new())
}

fn rename_rec(f: &Formula, used: &mut BTreeSet<Name>, map: &BTreeMap<Name, Term>) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(r, args) => Formula::Atom(r.clone(), args.iter().map(|t| t.subst(map)).collect()),
        Formula::Eq(a, b) => Formula::Eq(a.subst(map), b.subst(map)),
        Formula::Not(g) => Formula::Not(Box::new(rename_rec(g, used, map))),
        Formula::And(gs) => Formula::And(gs.iter().map(|g| rename_rec(g, used, map)).collect()),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| rename_rec(g, used, map)).collect()),
        Formula::Implies(a, b) => {
            let a = rename_rec(a, used, map);
            Formula::Implies(Box::new(a), Box::new(rename_rec(b, used, map)))
        }
        Formula::Iff(a, b) => {
            let a = rename_rec(a, used, map);
            Formula::Iff(Box::new(a), Box::new(rename_rec(b, used, map)))
        }
        Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
            let mut inner = map.clone();
            let mut new_vs = Vec::new();
            for v in vs {
                let nv = if used.contains(v) { fresh_name(v, used) } else { v.clone() };
                used.insert(nv.clone());
                inner.insert(v.clone(), Term::Var(nv.clone()));
                new_vs.push(nv);
            }
            let body = rename_rec(g, used, &inner);
            match f {
                Formula::Forall(..) => Formula::Forall(new_vs, Box::new(body)),
                _ => Formula::Exists(new_vs, Box::new(body)),
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Q {
    All,
    Ex,
}

type Prefix = Vec<(Q, Vec<Name>)>;

/// Prenex normal form of the NNF of `f`. When merging prefixes of
/// conjuncts/disjuncts, existential blocks are pulled out first.
pub fn pnf(f: &Formula) -> Formula {
    // NNF duplicates both sides of a biconditional, so binders are made
    // distinct only afterwards.
    let g = rename_apart(&nnf(f));
    let (prefix, matrix) = pnf_rec(&g);
    let mut out = matrix;
    for (q, vs) in prefix.into_iter().rev() {
        out = match q {
            Q::All => Formula::forall(vs, out),
            Q::Ex => Formula::exists(vs, out),
        };
    }
    out
}

fn push_block(p: &mut Prefix, q: Q, vs: Vec<Name>) {
    if vs.is_empty() {
        return;
    }
    match p.last_mut() {
        Some((lq, lvs)) if *lq == q => lvs.extend(vs),
        _ => p.push((q, vs)),
    }
}

fn pnf_rec(f: &Formula) -> (Prefix, Formula) {
    match f {
        Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
            let q = if matches!(f, Formula::Forall(..)) { Q::All } else { Q::Ex };
            let (inner, m) = pnf_rec(g);
            let mut p = Vec::new();
            push_block(&mut p, q, vs.clone());
            for (iq, ivs) in inner {
                push_block(&mut p, iq, ivs);
            }
            (p, m)
        }
        Formula::And(gs) | Formula::Or(gs) => {
            let parts: Vec<(Prefix, Formula)> = gs.iter().map(pnf_rec).collect();
            let mut prefixes: Vec<std::collections::VecDeque<(Q, Vec<Name>)>> =
                parts.iter().map(|(p, _)| p.iter().cloned().collect()).collect();
            let matrices: Vec<Formula> = parts.into_iter().map(|(_, m)| m).collect();
            let mut out = Vec::new();
            loop {
                let heads: Vec<Q> = prefixes.iter().filter_map(|p| p.front().map(|(q, _)| *q)).collect();
                if heads.is_empty() {
                    break;
                }
                let pick = if heads.contains(&Q::Ex) { Q::Ex } else { Q::All };
                let mut block = Vec::new();
                for p in prefixes.iter_mut() {
                    if matches!(p.front(), Some((q, _)) if *q == pick) {
                        block.extend(p.pop_front().unwrap().1);
                    }
                }
                push_block(&mut out, pick, block);
            }
            let m = if matches!(f, Formula::And(_)) { Formula::and(matrices) } else { Formula::or(matrices) };
            (out, m)
        }
        _ => (Vec::new(), f.clone()),
    }
}

/// Where a Skolem symbol came from.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SkolemOrigin {
    pub var: Name,
    pub tag: String,
}

/// Skolemization state shared by all parts of one verification condition.
#[derive(Clone, Debug, Default)]
pub struct SkolemCtx {
    pub counter: usize,
    pub origins: BTreeMap<Sym, SkolemOrigin>,
    /// Existential variables with these names are replaced by the constant
    /// of the same name instead of a fresh symbol (only when no universal
    /// encloses them).
    pub named: BTreeMap<Name, Sym>,
}

impl SkolemCtx {
    pub fn new() -> SkolemCtx {
        SkolemCtx::default()
    }

    /// Skolemizes the NNF of `f`, extending `vocab` with the new symbols.
    /// Free variables of `f` count as enclosing universals.
    pub fn skolemize(&mut self, f: &Formula, vocab: &mut Vocabulary, tag: &str) -> Formula {
        let g = rename_apart(&nnf(f));
        let free: Vec<Name> = g.free_vars().into_iter().collect();
        let mut scope = free;
        self.sk_rec(&g, &mut scope, vocab, tag)
    }

    fn sk_rec(&mut self, f: &Formula, scope: &mut Vec<Name>, vocab: &mut Vocabulary, tag: &str) -> Formula {
        match f {
            Formula::And(gs) => Formula::and(gs.iter().map(|g| self.sk_rec(g, scope, vocab, tag)).collect()),
            Formula::Or(gs) => Formula::or(gs.iter().map(|g| self.sk_rec(g, scope, vocab, tag)).collect()),
            Formula::Forall(vs, g) => {
                let n = scope.len();
                scope.extend(vs.iter().cloned());
                let body = self.sk_rec(g, scope, vocab, tag);
                scope.truncate(n);
                Formula::forall(vs.clone(), body)
            }
            Formula::Exists(vs, g) => {
                let body_free = f.free_vars();
                let args: Vec<Name> = scope.iter().filter(|v| body_free.contains(*v)).cloned().collect();
                let mut map = BTreeMap::new();
                for v in vs {
                    let t = if args.is_empty() {
                        let sym = match self.named.get(v) {
                            Some(s) => s.clone(),
                            None => self.fresh_sym(v, vocab, SymKind::Const, tag),
                        };
                        Term::Const(sym)
                    } else {
                        let sym = self.fresh_sym(v, vocab, SymKind::Func(args.len()), tag);
                        Term::App(sym, args.iter().map(|a| Term::Var(a.clone())).collect())
                    };
                    map.insert(v.clone(), t);
                }
                let body = substitute(g, &map);
                self.sk_rec(&body, scope, vocab, tag)
            }
            _ => f.clone(),
        }
    }

    fn fresh_sym(&mut self, v: &str, vocab: &mut Vocabulary, kind: SymKind, tag: &str) -> Sym {
        let base = v.trim_end_matches(|c: char| c.is_ascii_digit()).trim_end_matches('_');
        let base = if base.is_empty() { "v" } else { base };
        loop {
            let sym = Sym::new(&format!("sk_{}_{}", base, self.counter));
            self.counter += 1;
            if !vocab.contains(&sym) {
                vocab.add(sym.clone(), kind).expect("fresh symbol");
                self.origins.insert(sym.clone(), SkolemOrigin { var: Arc::from(v), tag: tag.to_string() });
                return sym;
            }
        }
    }
}

/// Skolemizes `f` with a fresh context.
pub fn skolemize(f: &Formula, vocab: &Vocabulary) -> (Formula, Vocabulary) {
    let mut v = vocab.clone();
    let mut ctx = SkolemCtx::new();
    let g = ctx.skolemize(f, &mut v, "formula");
    (g, v)
}
