use super::lexer::{lex, Tok};
use super::{
    is_reserved_prefix, Action, Command, Decl, DerivedRelation, ParseError, Pos, ProgramModel, ERROR_REL, KEYWORDS,
};
use crate::fol::{Formula, Name, Sym, SymKind, Term, Vocabulary};
use std::sync::Arc;

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    vocab: Vocabulary,
    /// locals of the action being parsed
    locals: Vec<Name>,
    in_action: bool,
    bound: Vec<Name>,
    /// unresolved identifiers become variables instead of errors
    allow_free: bool,
}

type PResult<T> = Result<T, ParseError>;

/// Parses a `.bhz` source file.
pub fn parse(src: &str) -> PResult<ProgramModel> {
    let mut vocab = Vocabulary::new();
    vocab.add(Sym::new(ERROR_REL), SymKind::Rel(0)).unwrap();
    let mut p = Parser { toks: lex(src)?, i: 0, vocab, locals: Vec::new(), in_action: false, bound: Vec::new(), allow_free: false };
    p.program()
}

/// Parses a single formula over `vocab`. Identifiers that are neither bound
/// nor declared are free variables.
pub fn parse_formula(src: &str, vocab: &Vocabulary) -> PResult<Formula> {
    let mut p = Parser {
        toks: lex(src)?,
        i: 0,
        vocab: vocab.clone(),
        locals: Vec::new(),
        in_action: false,
        bound: Vec::new(),
        allow_free: true,
    };
    let f = p.formula()?;
    p.expect(&Tok::Eof)?;
    Ok(f)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {}, found {}", t.describe(), self.peek().describe()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {}", t.describe())),
        }
    }

    fn plain_ident(&mut self) -> PResult<String> {
        let pos = self.pos();
        let s = self.ident()?;
        if s.ends_with('\'') {
            return Err(ParseError::Syntax { pos, msg: format!("primed name `{s}` not allowed here") });
        }
        Ok(s)
    }

    fn program(&mut self) -> PResult<ProgramModel> {
        let mut m = ProgramModel {
            vocab: Vocabulary::new(),
            axioms: vec![],
            inits: vec![],
            invariants: vec![],
            safety: vec![],
            derived: vec![],
            actions: vec![],
            desugared: false,
        };
        loop {
            let pos = self.pos();
            let kw = match self.peek() {
                Tok::Eof => break,
                Tok::Ident(s) => s.clone(),
                t => return self.err(format!("expected a declaration, found {}", t.describe())),
            };
            self.bump();
            match kw.as_str() {
                "relation" => {
                    let name = self.plain_ident()?;
                    let arity = if self.eat(&Tok::LParen) {
                        let n = match self.bump() {
                            Tok::Int(n) => n,
                            t => return self.err(format!("expected arity, found {}", t.describe())),
                        };
                        self.expect(&Tok::RParen)?;
                        n
                    } else {
                        0
                    };
                    self.declare(pos, &name, SymKind::Rel(arity))?;
                }
                "variable" => {
                    let name = self.plain_ident()?;
                    self.declare(pos, &name, SymKind::Const)?;
                }
                "axiom" | "init" | "invariant" | "safety" => {
                    let label = self.label()?;
                    let formula = self.formula()?;
                    let d = Decl { label, formula, pos };
                    match kw.as_str() {
                        "axiom" => m.axioms.push(d),
                        "init" => m.inits.push(d),
                        "invariant" => m.invariants.push(d),
                        _ => m.safety.push(d),
                    }
                }
                "derived" => {
                    let name = self.plain_ident()?;
                    let rel = Sym::new(&name);
                    let arity = match self.vocab.get(&rel) {
                        Some(SymKind::Rel(a)) => a,
                        _ => return Err(ParseError::Undeclared { pos, name }),
                    };
                    let params = if self.eat(&Tok::LParen) { self.ident_list(&Tok::RParen)? } else { vec![] };
                    if params.len() != arity {
                        return Err(ParseError::Arity { pos, name, expected: arity, got: params.len() });
                    }
                    self.expect(&Tok::Assign)?;
                    let n = self.bound.len();
                    self.bound.extend(params.iter().cloned());
                    let def = self.formula()?;
                    self.bound.truncate(n);
                    m.derived.push(DerivedRelation { rel, params, def });
                }
                "action" => {
                    let name = self.plain_ident()?;
                    let params = if self.eat(&Tok::LParen) { self.ident_list(&Tok::RParen)? } else { vec![] };
                    if m.actions.iter().any(|a| a.name == name) {
                        return Err(ParseError::Declaration { pos, msg: format!("duplicate action `{name}`") });
                    }
                    for p in &params {
                        if self.vocab.contains(&Sym { name: p.clone(), primed: false }) {
                            return Err(ParseError::Declaration {
                                pos,
                                msg: format!("parameter `{p}` shadows a declared symbol"),
                            });
                        }
                    }
                    self.locals = params.clone();
                    self.in_action = true;
                    let body = self.block()?;
                    self.in_action = false;
                    let mut locals = std::mem::take(&mut self.locals);
                    locals.retain(|l| !params.contains(l));
                    m.actions.push(Action { name, params, locals, body, pos });
                }
                other => {
                    self.i -= 1;
                    return self.err(format!("expected a declaration, found `{other}`"));
                }
            }
        }
        m.vocab = self.vocab.clone();
        Ok(m)
    }

    fn declare(&mut self, pos: Pos, name: &str, kind: SymKind) -> PResult<()> {
        if name == ERROR_REL || is_reserved_prefix(name) {
            return Err(ParseError::Declaration { pos, msg: format!("`{name}` is a reserved name") });
        }
        self.vocab
            .add(Sym::new(name), kind)
            .map_err(|_| ParseError::Declaration { pos, msg: format!("duplicate declaration of `{name}`") })
    }

    fn label(&mut self) -> PResult<Option<String>> {
        if let (Tok::Ident(s), Tok::Colon) = (self.peek().clone(), self.peek_at(1).clone()) {
            if !KEYWORDS.contains(&s.as_str()) {
                self.bump();
                self.bump();
                return Ok(Some(s));
            }
        }
        Ok(None)
    }

    fn ident_list(&mut self, close: &Tok) -> PResult<Vec<Name>> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            let pos = self.pos();
            let s = self.plain_ident()?;
            let n: Name = Arc::from(s.as_str());
            if out.contains(&n) {
                return Err(ParseError::Declaration { pos, msg: format!("duplicate name `{s}`") });
            }
            out.push(n);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    // ---- commands ----

    fn block(&mut self) -> PResult<Command> {
        self.expect(&Tok::LBrace)?;
        let mut cs = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.eat(&Tok::Semi) {
                continue;
            }
            cs.push(self.stmt()?);
        }
        Ok(Command::Block(cs))
    }

    fn stmt(&mut self) -> PResult<Command> {
        let pos = self.pos();
        if *self.peek() == Tok::LBrace {
            let mut c = self.block()?;
            while self.eat(&Tok::Bar) {
                let d = self.block()?;
                c = Command::Choice(Box::new(c), Box::new(d));
            }
            return Ok(c);
        }
        let word = match self.peek() {
            Tok::Ident(s) => s.clone(),
            t => return self.err(format!("expected a statement, found {}", t.describe())),
        };
        match word.as_str() {
            "skip" => {
                self.bump();
                Ok(Command::Skip)
            }
            "abort" => {
                self.bump();
                Ok(Command::Abort)
            }
            "local" => {
                self.bump();
                let name = self.plain_ident()?;
                if self.vocab.contains(&Sym::new(&name)) || self.locals.iter().any(|l| **l == *name) {
                    return Err(ParseError::Declaration { pos, msg: format!("local `{name}` shadows another symbol") });
                }
                if name.starts_with("sk_") {
                    return Err(ParseError::Declaration { pos, msg: format!("`{name}` is a reserved name") });
                }
                if self.eat(&Tok::Assign) {
                    self.expect(&Tok::Star)?;
                }
                let n: Name = Arc::from(name.as_str());
                self.locals.push(n.clone());
                Ok(Command::Local(n))
            }
            "assume" => {
                self.bump();
                Ok(Command::Assume(self.formula()?))
            }
            "if" => self.if_stmt(),
            _ => {
                let name = self.ident()?;
                let sym = Sym::new(&name);
                if self.eat(&Tok::Dot) {
                    let op = self.plain_ident()?;
                    if op != "insert" && op != "remove" {
                        return self.err(format!("unknown operation `{op}`"));
                    }
                    let arity = self.rel_arity(pos, &sym)?;
                    self.expect(&Tok::LParen)?;
                    let mut args = Vec::new();
                    let saved = self.allow_free;
                    self.allow_free = true;
                    if !matches!(self.peek(), Tok::RParen | Tok::Bar) {
                        loop {
                            args.push(self.term()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.allow_free = saved;
                    if args.len() != arity {
                        return Err(ParseError::Arity { pos, name, expected: arity, got: args.len() });
                    }
                    let mut vars = std::collections::BTreeSet::new();
                    args.iter().for_each(|a| a.free_vars_into(&mut vars));
                    let n = self.bound.len();
                    self.bound.extend(vars);
                    let guard = if self.eat(&Tok::Bar) { self.formula()? } else { Formula::True };
                    self.bound.truncate(n);
                    self.expect(&Tok::RParen)?;
                    return Ok(if op == "insert" {
                        Command::Insert { rel: sym, args, guard }
                    } else {
                        Command::Remove { rel: sym, args, guard }
                    });
                }
                if *self.peek() == Tok::LParen {
                    let arity = self.rel_arity(pos, &sym)?;
                    self.bump();
                    let params = self.ident_list(&Tok::RParen)?;
                    if params.len() != arity {
                        return Err(ParseError::Arity { pos, name, expected: arity, got: params.len() });
                    }
                    self.expect(&Tok::Assign)?;
                    let n = self.bound.len();
                    self.bound.extend(params.iter().cloned());
                    let body = self.formula()?;
                    self.bound.truncate(n);
                    return Ok(Command::Update { rel: sym, params, body });
                }
                self.expect(&Tok::Assign)?;
                match self.vocab.get(&sym) {
                    Some(SymKind::Rel(0)) => Ok(Command::Update { rel: sym, params: vec![], body: self.formula()? }),
                    Some(SymKind::Const) => {
                        self.expect(&Tok::Star)?;
                        Ok(Command::Havoc(sym))
                    }
                    None if self.locals.iter().any(|l| **l == *name) => {
                        self.expect(&Tok::Star)?;
                        Ok(Command::Havoc(sym))
                    }
                    Some(_) => Err(ParseError::Declaration { pos, msg: format!("cannot assign to `{name}`") }),
                    None => Err(ParseError::Undeclared { pos, name }),
                }
            }
        }
    }

    fn if_stmt(&mut self) -> PResult<Command> {
        self.bump();
        let cond = self.formula()?;
        let then = self.block()?;
        let els = if self.is_kw("else") {
            self.bump();
            if self.is_kw("if") {
                Some(Box::new(self.if_stmt()?))
            } else {
                Some(Box::new(self.block()?))
            }
        } else {
            None
        };
        Ok(Command::If { cond, then: Box::new(then), els })
    }

    fn rel_arity(&self, pos: Pos, sym: &Sym) -> PResult<usize> {
        match self.vocab.get(sym) {
            Some(SymKind::Rel(a)) => Ok(a),
            Some(_) => Err(ParseError::Declaration { pos, msg: format!("`{sym}` is not a relation") }),
            None => Err(ParseError::Undeclared { pos, name: sym.to_string() }),
        }
    }

    // ---- formulas ----

    pub fn formula(&mut self) -> PResult<Formula> {
        self.iff()
    }

    fn iff(&mut self) -> PResult<Formula> {
        let a = self.implies()?;
        if self.eat(&Tok::DArrow) {
            let b = self.iff()?;
            return Ok(Formula::iff(a, b));
        }
        Ok(a)
    }

    fn implies(&mut self) -> PResult<Formula> {
        let a = self.or()?;
        if self.eat(&Tok::Arrow) {
            let b = self.implies()?;
            return Ok(Formula::implies(a, b));
        }
        Ok(a)
    }

    fn or(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.and()?];
        while self.eat(&Tok::Bar) {
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn and(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.unary()?];
        while self.eat(&Tok::Amp) {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn unary(&mut self) -> PResult<Formula> {
        if self.eat(&Tok::Tilde) {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.is_kw("forall") || self.is_kw("exists") {
            let all = self.is_kw("forall");
            self.bump();
            let mut vars: Vec<Name> = Vec::new();
            loop {
                let v = self.plain_ident()?;
                vars.push(Arc::from(v.as_str()));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::Dot)?;
            let n = self.bound.len();
            self.bound.extend(vars.iter().cloned());
            let body = self.formula()?;
            self.bound.truncate(n);
            return Ok(if all { Formula::Forall(vars, Box::new(body)) } else { Formula::Exists(vars, Box::new(body)) });
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Formula> {
        let pos = self.pos();
        if self.is_kw("true") {
            self.bump();
            return Ok(Formula::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(Formula::False);
        }
        if self.eat(&Tok::LParen) {
            let f = self.formula()?;
            self.expect(&Tok::RParen)?;
            return Ok(f);
        }
        if let Tok::Ident(s) = self.peek().clone() {
            let sym = symbol_of(&s);
            if !self.is_bound(&s) {
                if let Some(SymKind::Rel(a)) = self.vocab.get(&sym) {
                    self.bump();
                    let args = if self.eat(&Tok::LParen) { self.term_list()? } else { vec![] };
                    if args.len() != a {
                        return Err(ParseError::Arity { pos, name: s, expected: a, got: args.len() });
                    }
                    return Ok(Formula::Atom(sym, args));
                }
            }
        }
        let lhs = self.term()?;
        let op = self.peek().clone();
        let rel_op = |p: &Parser, name: &str| -> PResult<Sym> {
            let lt = Sym::new(name);
            match p.vocab.get(&lt) {
                Some(SymKind::Rel(2)) => Ok(lt),
                _ => Err(ParseError::Declaration { pos, msg: format!("order comparisons need `relation {name}(2)`") }),
            }
        };
        match op {
            Tok::Eq | Tok::Neq => {
                self.bump();
                let rhs = self.term()?;
                let e = Formula::Eq(lhs, rhs);
                Ok(if op == Tok::Eq { e } else { Formula::Not(Box::new(e)) })
            }
            Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge => {
                self.bump();
                let lt = rel_op(self, "lt")?;
                let rhs = self.term()?;
                let (a, b) = if matches!(op, Tok::Lt | Tok::Le) { (lhs, rhs) } else { (rhs, lhs) };
                let strict = Formula::Atom(lt, vec![a.clone(), b.clone()]);
                Ok(if matches!(op, Tok::Lt | Tok::Gt) {
                    strict
                } else {
                    Formula::Or(vec![strict, Formula::Eq(a, b)])
                })
            }
            _ => self.err(format!("expected a comparison after term `{lhs}`, found {}", op.describe())),
        }
    }

    fn is_bound(&self, s: &str) -> bool {
        self.bound.iter().any(|b| **b == *s)
    }

    fn term_list(&mut self) -> PResult<Vec<Term>> {
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            out.push(self.term()?);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let pos = self.pos();
        let s = self.ident()?;
        if self.is_bound(&s) {
            return Ok(Term::Var(Arc::from(s.as_str())));
        }
        let sym = symbol_of(&s);
        match self.vocab.get(&sym) {
            Some(SymKind::Const) => return Ok(Term::Const(sym)),
            Some(SymKind::Func(a)) => {
                self.expect(&Tok::LParen)?;
                let args = self.term_list()?;
                if args.len() != a {
                    return Err(ParseError::Arity { pos, name: s, expected: a, got: args.len() });
                }
                return Ok(Term::App(sym, args));
            }
            Some(SymKind::Rel(_)) => {
                return Err(ParseError::Declaration { pos, msg: format!("relation `{s}` used as a term") })
            }
            None => {}
        }
        if self.locals.iter().any(|l| **l == *s) {
            return Ok(Term::Const(sym));
        }
        if self.in_action && s.starts_with("sk_") && !s.ends_with('\'') {
            // a Skolem reference: an action-scoped constant shared with the
            // Skolem constant of the negated post-state invariant
            self.locals.push(Arc::from(s.as_str()));
            return Ok(Term::Const(sym));
        }
        if self.allow_free {
            return Ok(Term::Var(Arc::from(s.as_str())));
        }
        Err(ParseError::Undeclared { pos, name: s })
    }
}

fn symbol_of(s: &str) -> Sym {
    match s.strip_suffix('\'') {
        Some(base) => Sym::primed(base),
        None => Sym::new(s),
    }
}
