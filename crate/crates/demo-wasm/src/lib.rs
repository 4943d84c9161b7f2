//! Browser bindings: check a model at a bound, list the bundled models,
//! generate a tiling system.

use bhz::checker::{self, CheckOptions, CheckReport};
use bhz::frontend::parse;
use bhz::horizon::Encoding;
use bhz::models::render_text;
use bhz::tiling::{generate_source, TileSpec};
use wasm_bindgen::prelude::*;

const EXAMPLES: &[(&str, &str)] = &[
    ("client_server_ae", include_str!("../../core/corpus/client_server_ae.bhz")),
    ("client_server_db_ae", include_str!("../../core/corpus/client_server_db_ae.bhz")),
    ("leader_ring_noaxiom", include_str!("../../core/corpus/leader_ring_noaxiom.bhz")),
    ("leader_ring_axiom", include_str!("../../core/corpus/leader_ring_axiom.bhz")),
    ("trusted_chain_incorrect", include_str!("../../core/corpus/trusted_chain_incorrect.bhz")),
];

/// Names of the bundled models, newline separated.
#[wasm_bindgen]
pub fn example_names() -> String {
    EXAMPLES.iter().map(|(n, _)| *n).collect::<Vec<_>>().join("\n")
}

#[wasm_bindgen]
pub fn example_source(name: &str) -> Option<String> {
    EXAMPLES.iter().find(|(n, _)| *n == name).map(|(_, s)| s.to_string())
}

fn encoding(name: &str) -> Result<Encoding, String> {
    match name {
        "enumerate" => Ok(Encoding::Enumerate),
        "approx" => Ok(Encoding::Approx),
        "guard" => Ok(Encoding::Guard),
        _ => Err(format!("unknown encoding `{name}`")),
    }
}

/// Checks `source` at `bound`. Returns the JSON report, or the text
/// rendering when `json` is false.
pub fn check_source(source: &str, bound: usize, enc: &str, json: bool) -> Result<String, String> {
    let m = parse(source).map_err(|e| e.to_string())?;
    let opts = CheckOptions { bound, encoding: encoding(enc)?, timeout: None, jobs: None, ..Default::default() };
    let r = checker::check(&m, &opts).map_err(|e| e.to_string())?;
    Ok(if json { serde_json::to_string_pretty(&r).map_err(|e| e.to_string())? } else { render(&r) })
}

fn render(r: &CheckReport) -> String {
    let mut s = String::new();
    for d in &r.diagnostics {
        s += &format!("error: {d}\n");
    }
    for v in &r.vcs {
        s += &format!("{:<40} {}", v.name(), v.verdict);
        if let Some(why) = &v.reason {
            s += &format!("  ({why})");
        }
        s.push('\n');
    }
    if let Some((pm, boundary)) = r.partial_model() {
        s.push('\n');
        s += &render_text(pm, boundary);
    }
    s += &format!("verdict: {}\n", r.verdict);
    s
}

#[wasm_bindgen]
pub fn check(source: &str, bound: usize, encoding: &str, json: bool) -> Result<String, JsError> {
    check_source(source, bound, encoding, json).map_err(|e| JsError::new(&e))
}

/// Source text of the tiling system for a JSON tile spec.
pub fn tiling_source(spec_json: &str) -> Result<String, String> {
    let spec = TileSpec::from_json(spec_json).map_err(|e| e.to_string())?;
    generate_source(&spec).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn gen_tiling(spec_json: &str) -> Result<String, JsError> {
    tiling_source(spec_json).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_examples_parse() {
        for name in example_names().lines() {
            parse(&example_source(name).unwrap()).unwrap();
        }
    }

    #[test]
    fn check_reports_verdicts() {
        let out = check_source(&example_source("client_server_ae").unwrap(), 1, "enumerate", false).unwrap();
        assert!(out.ends_with("verdict: PROVED\n"), "{out}");
        let out = check_source(&example_source("leader_ring_noaxiom").unwrap(), 1, "enumerate", false).unwrap();
        assert!(out.contains("verdict: UNKNOWN"), "{out}");
        assert!(check_source("relation", 1, "enumerate", false).is_err());
        assert!(check_source("", 1, "bogus", false).is_err());
    }

    #[test]
    fn tiling_from_json() {
        let src = tiling_source(
            r#"{"tiles":["a","b"],"start":"a","halt":"b","h":[["a","a"]],"v":[["a","a"]],"variant":"finiteBoard"}"#,
        )
        .unwrap();
        parse(&src).unwrap();
        assert!(tiling_source("{").is_err());
    }
}
