use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn bhz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bhz")).args(args).env_remove("BHZ_COLOR").output().unwrap()
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bhz-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn client_server_exits_zero() {
    let out = bhz(&["check", path(&corpus("client_server_ae.bhz")), "--bound", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verdict: PROVED"));
    assert!(!text.contains('\x1b'));
}

#[test]
fn leader_ring_json_has_partial_model_and_boundary() {
    let out = bhz(&["check", path(&corpus("leader_ring_noaxiom.bhz")), "--bound", "1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "UNKNOWN");
    let vcs = v["vcs"].as_array().unwrap();
    let bad = vcs.iter().find(|vc| vc["verdict"] == "UNKNOWN").unwrap();
    assert!(bad["partialModel"].is_object());
    let entries = bad["boundary"]["entries"].as_array().unwrap();
    assert!(entries.iter().any(|e| !e["outside"].as_array().unwrap().is_empty()));
}

#[test]
fn json_is_byte_identical_across_runs() {
    let file = corpus("client_server_db_ae.bhz");
    let args = ["check", path(&file), "--bound", "1", "--format", "json", "--seed", "7"];
    let a = bhz(&args);
    let b = bhz(&args);
    assert_eq!(a.status.code(), Some(1));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn missing_file_is_a_usage_error() {
    let out = bhz(&["check", "/nonexistent/nowhere.bhz"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(bhz(&["check", path(&corpus("client_server_ae.bhz")), "--encoding", "magic"]).status.code(), Some(2));
    let out = bhz(&["check", path(&corpus("client_server_ae.bhz")), "--encoding", "guard", "--bound", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bhz(&["sweep", path(&corpus("client_server_ae.bhz")), "--sweep-bounds", "3..1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ill_formed_source_exits_two() {
    let p = scratch("bad.bhz");
    std::fs::write(&p, "relation r(1)\nsafety s: forall x. q(x)\n").unwrap();
    assert_eq!(bhz(&["check", path(&p)]).status.code(), Some(2));
}

#[test]
fn sweep_reports_minimal_bounds() {
    let out = bhz(&["sweep", path(&corpus("client_server_db_ae.bhz")), "--sweep-bounds", "1..2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["sweep"].as_array().unwrap().len(), 2);
    let min = v["minimalProvedBound"].as_object().unwrap();
    assert!(min.values().any(|b| b == 2));
}

#[test]
fn dump_ground_writes_smtlib() {
    let p = scratch("ground.smt2");
    let out = bhz(&["check", path(&corpus("client_server_ae.bhz")), "--dump-ground", path(&p)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.contains("(check-sat)"));
    assert!(text.contains("(reset)"));
}

#[test]
fn gen_tiling_output_checks() {
    let spec = scratch("spec.json");
    std::fs::write(
        &spec,
        r#"{"tiles":["start","halt"],"start":"start","halt":"halt","h":[["start","halt"]],"v":[],"variant":"finiteBoard"}"#,
    )
    .unwrap();
    let model = scratch("tiling.bhz");
    assert_eq!(bhz(&["gen-tiling", path(&spec), "-o", path(&model)]).status.code(), Some(0));
    let out = bhz(&["check", path(&model), "--bound", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("place_halt"));
}

#[test]
fn instrument_expand_and_local_inst() {
    let exp = scratch("expanded.bhz");
    let out = bhz(&["instrument", "expand", path(&corpus("client_server_ae.bhz")), "--depth", "1", "-o", path(&exp)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(&exp).unwrap().contains("invariant"));

    let inst = scratch("local.bhz");
    let out = bhz(&[
        "instrument",
        "local-inst",
        path(&corpus("client_server_db_instr.bhz")),
        "--derived",
        "r1",
        "--action",
        "check",
        "--args",
        "u,p",
        "-o",
        path(&inst),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(bhz(&["check", path(&inst), "--bound", "0"]).status.code(), Some(0));
}
