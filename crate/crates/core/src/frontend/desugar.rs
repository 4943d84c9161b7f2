use super::{Action, Command, DesugarError, ProgramModel, ERROR_REL};
use crate::fol::{fresh_name, substitute, Formula, Name, Sym, SymKind, Term, Vocabulary};
use std::collections::{BTreeMap, BTreeSet};

/// Rewrites every action into the core commands. Parameters become leading
/// havocs of action locals. Idempotent.
pub fn desugar(m: &ProgramModel) -> Result<ProgramModel, DesugarError> {
    let mut out = m.clone();
    for a in out.actions.iter_mut() {
        *a = desugar_action(a, &m.vocab)?;
    }
    out.desugared = true;
    Ok(out)
}

fn desugar_action(a: &Action, vocab: &Vocabulary) -> Result<Action, DesugarError> {
    let mut locals: Vec<Name> = a.params.clone();
    for l in &a.locals {
        if !locals.contains(l) {
            locals.push(l.clone());
        }
    }
    let mut avoid: BTreeSet<Name> = vocab.iter().map(|(s, _)| s.name.clone()).collect();
    avoid.extend(locals.iter().cloned());
    let cx = Cx { action: &a.name, vocab, avoid };
    let mut cs: Vec<Command> = a.params.iter().map(|p| Command::Havoc(Sym { name: p.clone(), primed: false })).collect();
    cs.push(cx.cmd(&a.body)?);
    Ok(Action { name: a.name.clone(), params: vec![], locals, body: Command::seq(cs), pos: a.pos })
}

struct Cx<'a> {
    action: &'a str,
    vocab: &'a Vocabulary,
    avoid: BTreeSet<Name>,
}

impl Cx<'_> {
    fn cmd(&self, c: &Command) -> Result<Command, DesugarError> {
        Ok(match c {
            Command::Skip | Command::Havoc(_) | Command::Assume(_) | Command::Update { .. } => c.clone(),
            Command::Abort => Command::Update { rel: Sym::new(ERROR_REL), params: vec![], body: Formula::True },
            Command::Seq(a, b) => Command::Seq(Box::new(self.cmd(a)?), Box::new(self.cmd(b)?)),
            Command::Choice(a, b) => Command::Choice(Box::new(self.cmd(a)?), Box::new(self.cmd(b)?)),
            Command::Local(v) => Command::Havoc(Sym { name: v.clone(), primed: false }),
            Command::Block(cs) => Command::seq(cs.iter().map(|c| self.cmd(c)).collect::<Result<_, _>>()?),
            Command::If { cond, then, els } => {
                let t = Command::seq(vec![Command::Assume(cond.clone()), self.cmd(then)?]);
                let e = match els {
                    Some(e) => Command::seq(vec![Command::Assume(Formula::not(cond.clone())), self.cmd(e)?]),
                    None => Command::Assume(Formula::not(cond.clone())),
                };
                Command::Choice(Box::new(t), Box::new(e))
            }
            Command::Insert { rel, args, guard } | Command::Remove { rel, args, guard } => {
                let arity = match self.vocab.get(rel) {
                    Some(SymKind::Rel(a)) => a,
                    _ => {
                        return Err(DesugarError::Sugar {
                            action: self.action.to_string(),
                            msg: format!("insert/remove on undeclared relation `{rel}`"),
                        })
                    }
                };
                if arity != args.len() {
                    return Err(DesugarError::Sugar {
                        action: self.action.to_string(),
                        msg: format!("`{rel}` expects {arity} arguments"),
                    });
                }
                let mut avoid = self.avoid.clone();
                args.iter().for_each(|t| t.free_vars_into(&mut avoid));
                guard.free_vars().into_iter().for_each(|v| {
                    avoid.insert(v);
                });
                let mut params = Vec::new();
                for _ in 0..arity {
                    let p = fresh_name("x", &avoid);
                    avoid.insert(p.clone());
                    params.push(p);
                }
                let mut map: BTreeMap<Name, Term> = BTreeMap::new();
                let mut eqs = Vec::new();
                for (p, t) in params.iter().zip(args) {
                    let x = Term::Var(p.clone());
                    match t {
                        Term::Var(y) if !map.contains_key(y) => {
                            map.insert(y.clone(), x);
                        }
                        Term::Var(y) => eqs.push(Formula::Eq(x, map[y].clone())),
                        t => eqs.push(Formula::Eq(x, t.subst(&map))),
                    }
                }
                let mut cond = eqs;
                cond.push(substitute(guard, &map));
                let cond = Formula::and(cond);
                let cur = Formula::Atom(rel.clone(), params.iter().map(|p| Term::Var(p.clone())).collect());
                let body = if matches!(c, Command::Insert { .. }) {
                    Formula::or(vec![cur, cond])
                } else {
                    Formula::and(vec![cur, Formula::not(cond)])
                };
                Command::Update { rel: rel.clone(), params, body }
            }
        })
    }
}
