use bhz::checker::{check, sweep, CheckOptions, CheckVerdict};
use bhz::fol::is_epr;
use bhz::frontend::{desugar, parse, print_model, validate, ProgramModel};
use bhz::models::ModelLabel;
use bhz::vcgen::delta_of_program;
use std::path::PathBuf;

fn corpus() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "bhz"))
        .collect();
    v.sort();
    v
}

#[test]
fn corpus_parses_and_validates() {
    for p in corpus() {
        let src = std::fs::read_to_string(&p).unwrap();
        let m = parse(&src).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let d = desugar(&m).unwrap();
        let diags = validate(&d);
        assert!(diags.is_empty(), "{}: {:?}", p.display(), diags);
    }
}

fn load(p: &PathBuf) -> ProgramModel {
    parse(&std::fs::read_to_string(p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn stem(p: &PathBuf) -> String {
    p.file_stem().unwrap().to_string_lossy().into_owned()
}

fn at(bound: usize) -> CheckOptions {
    CheckOptions { bound, ..Default::default() }
}

#[test]
fn printing_round_trips() {
    for p in corpus() {
        let m = load(&p);
        let d = desugar(&m).unwrap();
        let printed = print_model(&d);
        let again = parse(&printed).unwrap_or_else(|e| panic!("{}: {e}\n{printed}", p.display()));
        assert_eq!(print_model(&desugar(&again).unwrap()), printed, "{}", p.display());
        let sugared = print_model(&m);
        let reparsed = parse(&sugared).unwrap_or_else(|e| panic!("{}: {e}\n{sugared}", p.display()));
        assert_eq!(print_model(&desugar(&reparsed).unwrap()), printed, "{}", p.display());
    }
}

#[test]
fn desugaring_is_idempotent_and_yields_core_commands() {
    for p in corpus() {
        let d = desugar(&load(&p)).unwrap();
        assert_eq!(desugar(&d).unwrap(), d, "{}", p.display());
        for a in &d.actions {
            assert!(a.body.is_core(), "{}: {}", p.display(), a.name);
        }
    }
}

#[test]
fn every_action_relation_is_epr() {
    for p in corpus() {
        let t = delta_of_program(&load(&p)).unwrap();
        for (name, d) in &t.per_action {
            assert!(is_epr(d), "{}: {name}", p.display());
        }
    }
}

#[test]
fn whole_relation_agrees_with_per_action_checks() {
    for p in corpus() {
        let m = load(&p);
        let per = check(&m, &at(1)).unwrap();
        let whole = check(&m, &CheckOptions { whole_delta: true, ..at(1) }).unwrap();
        assert_eq!(per.verdict, whole.verdict, "{}", p.display());
    }
}

#[test]
fn proved_models_are_proved_by_bound_two() {
    let proved = [
        "client_server_ae",
        "client_server_db_ae",
        "client_server_db_instr",
        "client_server_instr",
        "leader_ring_axiom",
        "trusted_chain_correct",
    ];
    for p in corpus().into_iter().filter(|p| proved.contains(&stem(p).as_str())) {
        let rs = sweep(&load(&p), 0, 2, &CheckOptions::default()).unwrap();
        let k = rs.iter().position(|r| r.verdict == CheckVerdict::Proved);
        assert!(k.is_some(), "{}: {:?}", p.display(), rs.iter().map(|r| r.verdict).collect::<Vec<_>>());
    }
}

#[test]
fn incorrect_trusted_chain_models_grow_with_the_bound() {
    let p = corpus().into_iter().find(|p| stem(p) == "trusted_chain_incorrect").unwrap();
    let m = load(&p);
    let size = |k| {
        let r = check(&m, &at(k)).unwrap();
        assert_eq!(r.verdict, CheckVerdict::Unknown);
        r.partial_model().unwrap().0.elements.len()
    };
    assert!(size(2) >= size(1));
}

#[test]
fn complete_unknown_vcs_carry_counterexamples() {
    for p in corpus() {
        let r = check(&load(&p), &at(1)).unwrap();
        for v in r.vcs.iter().filter(|v| v.complete && v.verdict == CheckVerdict::Unknown) {
            let pm = v.partial_model.as_ref().unwrap();
            assert_eq!(pm.label, ModelLabel::Counterexample, "{}: {}", p.display(), v.name());
        }
    }
}
