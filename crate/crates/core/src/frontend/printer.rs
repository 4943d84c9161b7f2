use super::{Command, Decl, ProgramModel, ERROR_REL};
use crate::fol::{Name, SymKind};
use std::collections::BTreeSet;
use std::fmt::Write;

/// Renders a model as `.bhz` source that parses back to the same model.
pub fn print_model(m: &ProgramModel) -> String {
    let mut out = String::new();
    for (s, k) in m.vocab.iter() {
        match k {
            SymKind::Rel(_) if &*s.name == ERROR_REL => {}
            SymKind::Rel(0) => writeln!(out, "relation {s}").unwrap(),
            SymKind::Rel(a) => writeln!(out, "relation {s}({a})").unwrap(),
            SymKind::Const => writeln!(out, "variable {s}").unwrap(),
            SymKind::Func(_) => {}
        }
    }
    let decls = |out: &mut String, kw: &str, ds: &[Decl]| {
        for d in ds {
            match &d.label {
                Some(l) => writeln!(out, "{kw} {l}: {}", d.formula).unwrap(),
                None => writeln!(out, "{kw} {}", d.formula).unwrap(),
            }
        }
    };
    decls(&mut out, "axiom", &m.axioms);
    decls(&mut out, "init", &m.inits);
    decls(&mut out, "invariant", &m.invariants);
    decls(&mut out, "safety", &m.safety);
    for d in &m.derived {
        let ps: Vec<String> = d.params.iter().map(|p| p.to_string()).collect();
        writeln!(out, "derived {}({}) := {}", d.rel, ps.join(", "), d.def).unwrap();
    }
    for a in &m.actions {
        out.push('\n');
        if a.params.is_empty() {
            writeln!(out, "action {} {{", a.name).unwrap();
        } else {
            let ps: Vec<String> = a.params.iter().map(|p| p.to_string()).collect();
            writeln!(out, "action {}({}) {{", a.name, ps.join(", ")).unwrap();
        }
        let mut st = Printer { locals: a.locals.iter().cloned().collect(), declared: BTreeSet::new(), out: String::new() };
        st.declared.extend(a.params.iter().cloned());
        st.stmts(&a.body, 1);
        out.push_str(&st.out);
        out.push_str("}\n");
    }
    out
}

struct Printer {
    locals: BTreeSet<Name>,
    declared: BTreeSet<Name>,
    out: String,
}

impl Printer {
    fn line(&mut self, ind: usize, s: &str) {
        for _ in 0..ind {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn stmts(&mut self, c: &Command, ind: usize) {
        match c {
            Command::Seq(a, b) => {
                self.stmts(a, ind);
                self.stmts(b, ind);
            }
            Command::Block(cs) => cs.iter().for_each(|c| self.stmts(c, ind)),
            _ => self.stmt(c, ind),
        }
    }

    fn braced(&mut self, c: &Command, ind: usize) {
        self.stmts(c, ind + 1);
    }

    fn stmt(&mut self, c: &Command, ind: usize) {
        match c {
            Command::Skip => self.line(ind, "skip;"),
            Command::Abort => self.line(ind, "abort;"),
            Command::Update { rel, params, body } => {
                if params.is_empty() {
                    self.line(ind, &format!("{rel} := {body};"));
                } else {
                    let ps: Vec<String> = params.iter().map(|p| p.to_string()).collect();
                    self.line(ind, &format!("{rel}({}) := {body};", ps.join(", ")));
                }
            }
            Command::Havoc(v) => {
                if self.locals.contains(&v.name) && self.declared.insert(v.name.clone()) {
                    self.line(ind, &format!("local {v} := *;"));
                } else {
                    self.line(ind, &format!("{v} := *;"));
                }
            }
            Command::Local(v) => {
                self.declared.insert(v.clone());
                self.line(ind, &format!("local {v} := *;"));
            }
            Command::Assume(f) => self.line(ind, &format!("assume {f};")),
            Command::Insert { rel, args, guard } | Command::Remove { rel, args, guard } => {
                let op = if matches!(c, Command::Insert { .. }) { "insert" } else { "remove" };
                let a: Vec<String> = args.iter().map(|t| t.to_string()).collect();
                let g = if *guard == crate::fol::Formula::True { String::new() } else { format!(" | {guard}") };
                self.line(ind, &format!("{rel}.{op}({}{g});", a.join(", ")));
            }
            Command::If { .. } => {
                self.if_chain(c, ind, "if");
                self.line(ind, "}");
            }
            Command::Choice(..) => {
                let mut parts = Vec::new();
                choice_parts(c, &mut parts);
                self.line(ind, "{");
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        self.line(ind, "} | {");
                    }
                    self.braced(p, ind);
                }
                self.line(ind, "}");
            }
            Command::Seq(..) | Command::Block(_) => {
                self.line(ind, "{");
                self.braced(c, ind);
                self.line(ind, "}");
            }
        }
    }

    fn if_chain(&mut self, c: &Command, ind: usize, kw: &str) {
        let Command::If { cond, then, els } = c else { unreachable!() };
        self.line(ind, &format!("{kw} {cond} {{"));
        self.braced(then, ind);
        match els.as_deref() {
            None => {}
            Some(e @ Command::If { .. }) => self.if_chain(e, ind, "} else if"),
            Some(e) => {
                self.line(ind, "} else {");
                self.braced(e, ind);
            }
        }
    }
}

fn choice_parts<'a>(c: &'a Command, out: &mut Vec<&'a Command>) {
    match c {
        Command::Choice(a, b) => {
            choice_parts(a, out);
            out.push(b);
        }
        _ => out.push(c),
    }
}
