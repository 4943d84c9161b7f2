//! Property tests for the logical transformations, the ground solver, the
//! term banks, wp and the tiling generator.

use bhz::checker::{self, CheckOptions, CheckVerdict, FiniteSearch};
use bhz::fol::{
    is_ae, is_af, is_epr, is_universal, name, nnf, pnf, skolemize, substitute_relation, Formula, Name, Structure, Sym,
    SymKind, Term, Vocabulary,
};
use bhz::frontend::{desugar, parse, validate, Command};
use bhz::horizon::{bounded_instantiation_set, terms_up_to};
use bhz::instrument::local_instantiate;
use bhz::solver::{solve, GroundProblem, SmtLimits, Verdict};
use bhz::tiling::{generate_model, TileSpec, Variant};
use bhz::vcgen::{delta_of_action, initiation_vc, wp, VcKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

fn vocab() -> Vocabulary {
    let mut v = Vocabulary::new();
    v.add(Sym::new("P"), SymKind::Rel(1)).unwrap();
    v.add(Sym::new("R"), SymKind::Rel(2)).unwrap();
    v.add(Sym::new("c"), SymKind::Const).unwrap();
    v
}

fn pick_term(rng: &mut ChaCha8Rng, scope: &[Name]) -> Term {
    if scope.is_empty() || rng.gen_bool(0.2) {
        Term::cst("c")
    } else {
        Term::Var(scope[rng.gen_range(0..scope.len())].clone())
    }
}

fn atom(rng: &mut ChaCha8Rng, scope: &[Name], extra: Option<&str>) -> Formula {
    match (rng.gen_range(0..4), extra) {
        (0, _) => Formula::eq(pick_term(rng, scope), pick_term(rng, scope)),
        (1, Some(q)) => Formula::atom(q, vec![pick_term(rng, scope)]),
        (1, None) | (2, _) => Formula::atom("P", vec![pick_term(rng, scope)]),
        _ => Formula::atom("R", vec![pick_term(rng, scope), pick_term(rng, scope)]),
    }
}

/// A random formula whose free variables are among `scope`, with at most
/// `quants` nested quantifiers.
fn formula(rng: &mut ChaCha8Rng, scope: &mut Vec<Name>, depth: usize, quants: usize, extra: Option<&str>) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return atom(rng, scope, extra);
    }
    match rng.gen_range(0..7) {
        0 => Formula::not(formula(rng, scope, depth - 1, quants, extra)),
        1 => Formula::and(vec![formula(rng, scope, depth - 1, quants, extra), formula(rng, scope, depth - 1, quants, extra)]),
        2 => Formula::or(vec![formula(rng, scope, depth - 1, quants, extra), formula(rng, scope, depth - 1, quants, extra)]),
        3 => Formula::implies(formula(rng, scope, depth - 1, quants, extra), formula(rng, scope, depth - 1, quants, extra)),
        4 => Formula::iff(formula(rng, scope, depth - 1, quants, extra), formula(rng, scope, depth - 1, quants, extra)),
        _ if quants == 0 => atom(rng, scope, extra),
        q => {
            let v = name(&format!("v{}", scope.len()));
            scope.push(v.clone());
            let body = formula(rng, scope, depth - 1, quants - 1, extra);
            scope.pop();
            if q == 5 {
                Formula::forall(vec![v], body)
            } else {
                Formula::exists(vec![v], body)
            }
        }
    }
}

fn sentence(seed: u64, quants: usize) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    formula(&mut rng, &mut vec![], 4, quants, None)
}

fn structures(v: &Vocabulary, max: usize) -> Vec<Structure> {
    (1..=max).flat_map(|n| Structure::enumerate(v, n).collect::<Vec<_>>()).collect()
}

fn satisfiable_at(f: &Formula, v: &Vocabulary, size: usize) -> bool {
    Structure::enumerate(v, size).any(|s| s.eval(f).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn nnf_and_pnf_preserve_truth(seed in any::<u64>()) {
        let f = sentence(seed, 3);
        let (n, p) = (nnf(&f), pnf(&f));
        for s in structures(&vocab(), 3) {
            let want = s.eval(&f).unwrap();
            prop_assert_eq!(s.eval(&n).unwrap(), want, "nnf of {}", f);
            prop_assert_eq!(s.eval(&p).unwrap(), want, "pnf of {}", f);
        }
    }

    #[test]
    fn skolemization_is_universal_and_equisatisfiable(seed in any::<u64>()) {
        let f = sentence(seed, 2);
        let (g, sv) = skolemize(&f, &vocab());
        prop_assert!(is_universal(&g), "{} -> {}", f, g);
        for size in 1..=3 {
            if Structure::count(&sv, size) > 200_000 {
                continue;
            }
            prop_assert_eq!(satisfiable_at(&f, &vocab(), size), satisfiable_at(&g, &sv, size), "size {}: {} vs {}", size, f, g);
        }
    }

    #[test]
    fn nnf_keeps_the_af_class(seed in any::<u64>()) {
        let f = sentence(seed, 3);
        if is_af(&f) {
            prop_assert!(is_af(&nnf(&f)));
        }
    }

    #[test]
    fn relation_substitution_commutes_with_evaluation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = formula(&mut rng, &mut vec![], 4, 2, Some("Q"));
        let x = name("px");
        let psi = formula(&mut rng, &mut vec![x.clone()], 3, 1, None);
        let q = Sym::new("Q");
        let sub = substitute_relation(&phi, &q, std::slice::from_ref(&x), &psi).unwrap();
        for mut s in structures(&vocab(), 3) {
            let direct = s.eval(&sub).unwrap();
            s.define_relation(&q, std::slice::from_ref(&x), &psi).unwrap();
            prop_assert_eq!(s.eval(&phi).unwrap(), direct, "{} with Q := {}", phi, psi);
        }
    }
}

fn ground_problem(seed: u64) -> GroundProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = ["a", "b", "d"];
    let mut pool: Vec<Term> = base.iter().map(|c| Term::cst(c)).collect();
    for _ in 0..rng.gen_range(0..3) {
        let t = pool[rng.gen_range(0..pool.len())].clone();
        pool.push(Term::app("f", vec![t]));
    }
    let pick = |rng: &mut ChaCha8Rng| pool[rng.gen_range(0..pool.len())].clone();
    let mut sentences = vec![];
    for _ in 0..rng.gen_range(1..6) {
        let lits: Vec<Formula> = (0..rng.gen_range(1..4))
            .map(|_| {
                let a = match rng.gen_range(0..3) {
                    0 => Formula::eq(pick(&mut rng), pick(&mut rng)),
                    1 => Formula::atom("P", vec![pick(&mut rng)]),
                    _ => Formula::atom("R", vec![pick(&mut rng), pick(&mut rng)]),
                };
                if rng.gen_bool(0.5) {
                    Formula::not(a)
                } else {
                    a
                }
            })
            .collect();
        sentences.push(Formula::or(lits));
    }
    GroundProblem::new(sentences)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn verdicts_survive_reordering_and_renaming(seed in any::<u64>()) {
        let p = ground_problem(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let mut sentences = p.sentences.clone();
        sentences.shuffle(&mut rng);
        let mut rename = |s: &Sym| match &*s.name {
            "a" => Sym::new("k_b"),
            "b" => Sym::new("k_a"),
            "d" => Sym::new("k_z"),
            _ => s.clone(),
        };
        let renamed: Vec<Formula> = sentences.iter().map(|f| f.map_syms(&mut rename)).collect();
        let q = GroundProblem::new(renamed);
        prop_assert_eq!(solve(&p).is_unsat(), solve(&q).is_unsat());
    }

    #[test]
    fn models_only_use_occurring_terms(seed in any::<u64>()) {
        let p = ground_problem(seed);
        if let Verdict::Sat(m) = solve(&p) {
            let universe: BTreeSet<Term> = p.universe().into_iter().collect();
            prop_assert!(m.class_of.keys().all(|t| universe.contains(t)));
            prop_assert!(m.classes.iter().all(|c| !c.is_empty()));
        }
    }

    #[test]
    fn term_levels_nest(consts in 0usize..3, unary in 0usize..3, binary in 0usize..2, k in 0usize..3) {
        let mut v = Vocabulary::new();
        for i in 0..consts {
            v.add(Sym::new(&format!("c{i}")), SymKind::Const).unwrap();
        }
        for i in 0..unary {
            v.add(Sym::new(&format!("f{i}")), SymKind::Func(1)).unwrap();
        }
        for i in 0..binary {
            v.add(Sym::new(&format!("g{i}")), SymKind::Func(2)).unwrap();
        }
        let bank = terms_up_to(&v, k);
        for j in 0..=k {
            prop_assert!(bank.level(j).iter().all(|t| t.depth() <= j));
            if j < k {
                let next: BTreeSet<&Term> = bank.level(j + 1).iter().collect();
                prop_assert!(bank.level(j).iter().all(|t| next.contains(t)));
            }
        }
    }
}

fn ae(rng: &mut ChaCha8Rng, tag: &str) -> Formula {
    let xs = vec![name(&format!("{tag}x"))];
    let ys = vec![name(&format!("{tag}y"))];
    let scope: Vec<Name> = xs.iter().chain(&ys).cloned().collect();
    let body = Formula::or(vec![atom(rng, &scope, None), atom(rng, &scope, None), atom(rng, &scope, None)]);
    Formula::forall(xs, Formula::exists(ys, body))
}

fn ea(rng: &mut ChaCha8Rng) -> Formula {
    let scope = vec![name("ex"), name("ay")];
    Formula::exists(
        vec![name("ex")],
        Formula::forall(vec![name("ay")], Formula::or(vec![atom(rng, &scope, None), atom(rng, &scope, None)])),
    )
}

fn command(rng: &mut ChaCha8Rng, depth: usize) -> Command {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..5) {
            0 => Command::Skip,
            1 => Command::Abort,
            2 => Command::Havoc(Sym::new("c")),
            3 => Command::Assume(ea(rng)),
            _ => {
                let ps = vec![name("u0"), name("u1")];
                let body = Formula::and(vec![atom(rng, &ps, None), atom(rng, &ps, None)]);
                Command::Update { rel: Sym::new("R"), params: ps, body }
            }
        };
    }
    let (a, b) = (command(rng, depth - 1), command(rng, depth - 1));
    if rng.gen_bool(0.5) {
        Command::Seq(Box::new(a), Box::new(b))
    } else {
        Command::Choice(Box::new(a), Box::new(b))
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn wp_preserves_ae(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = command(&mut rng, 3);
        let q = ae(&mut rng, "q");
        let w = wp(&c, &q, &Formula::True).unwrap();
        prop_assert!(is_ae(&w), "wp({:?}, {}) = {}", c, q, w);
    }

    #[test]
    fn models_of_the_vc_satisfy_bounded_instances(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vc = initiation_vc(&ae(&mut rng, "i"), &ae(&mut rng, "v"), &Formula::True, &vocab());
        for size in 1..=2 {
            if let FiniteSearch::Found(st) = checker::find_finite_model(&vc, size, &SmtLimits::default()) {
                for k in 0..=1 {
                    let set = bounded_instantiation_set(&vc, k, 100_000).unwrap();
                    for s in set.sentences() {
                        prop_assert!(st.eval(&s).unwrap(), "{} fails in a model of {}", s, vc.name());
                    }
                }
            }
        }
    }
}

fn tile_spec(seed: u64) -> TileSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let tiles: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    let pairs = |rng: &mut ChaCha8Rng| -> Vec<(String, String)> {
        let mut out = vec![];
        for a in &tiles {
            for b in &tiles {
                if rng.gen_bool(0.4) {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    };
    let h = pairs(&mut rng);
    let v = pairs(&mut rng);
    TileSpec {
        start: tiles[0].clone(),
        halt: tiles[rng.gen_range(1..n)].clone(),
        h,
        v,
        variant: if rng.gen_bool(0.5) { Variant::FiniteBoard } else { Variant::LowerTriangular },
        tiles,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn generated_tilings_validate_and_start_inductive(seed in any::<u64>()) {
        let spec = tile_spec(seed);
        let m = generate_model(&spec).unwrap();
        prop_assert!(validate(&m).is_empty());
        let dm = desugar(&m).unwrap();
        for a in &dm.actions {
            prop_assert!(is_epr(&delta_of_action(&dm, a).unwrap()), "{}", a.name);
        }
        let opts = CheckOptions { bound: 0, ..Default::default() };
        let r = checker::check(&m, &opts).unwrap();
        let init = r.vc(VcKind::Initiation, None).unwrap();
        prop_assert_eq!(init.verdict, CheckVerdict::Proved);
    }
}

/// A start tile that is also the halt tile violates safety in the initial
/// state, so initiation must fail.
#[test]
fn start_equal_to_halt_fails_initiation() {
    let spec = TileSpec {
        tiles: vec!["t".into()],
        start: "t".into(),
        halt: "t".into(),
        h: vec![],
        v: vec![],
        variant: Variant::FiniteBoard,
    };
    let r = checker::check(&generate_model(&spec).unwrap(), &CheckOptions { bound: 0, ..Default::default() }).unwrap();
    assert_eq!(r.vc(VcKind::Initiation, None).unwrap().verdict, CheckVerdict::Unknown);
}

/// (∀x. r(x) ↔ ψ(x)) ∧ δ → δ̂ on every structure of size ≤ 2.
#[test]
fn local_instantiation_is_implied_by_the_definition() {
    let src = "\
relation q(2)
relation r(1)
derived r(x) := exists y. q(x, y)
action step(u) {
  assume r(u);
  q.insert(u, u);
}
action clear(u) {
  q.remove(u, y);
  r.remove(u);
}
";
    let m = parse(src).unwrap();
    for action in ["step", "clear"] {
        let (inst, fresh) = local_instantiate(&m, "r", action, &[name("u")]).unwrap();
        assert_eq!(fresh.len(), 1);
        let (dm, di) = (desugar(&m).unwrap(), desugar(&inst).unwrap());
        let delta = delta_of_action(&dm, dm.action(action).unwrap()).unwrap();
        let hat = delta_of_action(&di, di.action(action).unwrap()).unwrap();
        let def = Formula::forall(
            vec![name("x")],
            Formula::iff(
                Formula::atom("r", vec![Term::var("x")]),
                Formula::exists(vec![name("y")], Formula::atom("q", vec![Term::var("x"), Term::var("y")])),
            ),
        );
        let full = m.vocab.union(&m.vocab.primed_copy()).unwrap();
        let mut seen = BTreeMap::new();
        for s in structures(&full, 2) {
            let pre = s.eval(&def).unwrap() && s.eval(&delta).unwrap();
            *seen.entry(pre).or_insert(0) += 1;
            if pre {
                assert!(s.eval(&hat).unwrap(), "{action}: δ holds but the instantiated δ̂ does not");
            }
        }
        assert!(seen.get(&true).copied().unwrap_or(0) > 0, "{action}: the premise never holds");
    }
}

