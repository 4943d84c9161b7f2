//! Tiling transition systems: a board filled one tile at a time in board
//! order, with an AE invariant stating that the placed prefix is a valid
//! partial tiling.

use crate::frontend::{parse, ParseError, ProgramModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TilingError {
    #[error("the tile set is empty")]
    Empty,
    #[error("unknown tile `{0}`")]
    UnknownTile(String),
    #[error("tile names `{0}` and `{1}` collide")]
    Collision(String, String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Variant {
    /// Rows end at the constant `max`; CTIs over finite structures are
    /// halting tilings.
    FiniteBoard,
    /// Row `i` has columns `0..=i`, with the relation `P` propagated along
    /// placed tiles and a flag `f` that drops when `P` is missing.
    LowerTriangular,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileSpec {
    pub tiles: Vec<String>,
    pub start: String,
    pub halt: String,
    /// (left, right) pairs.
    #[serde(default)]
    pub h: Vec<(String, String)>,
    /// (above, below) pairs.
    #[serde(default)]
    pub v: Vec<(String, String)>,
    pub variant: Variant,
}

impl TileSpec {
    pub fn from_json(s: &str) -> Result<TileSpec, TilingError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn validate(&self) -> Result<(), TilingError> {
        if self.tiles.is_empty() {
            return Err(TilingError::Empty);
        }
        let known: BTreeSet<&str> = self.tiles.iter().map(String::as_str).collect();
        let named = [&self.start, &self.halt].into_iter();
        let pairs = self.h.iter().chain(&self.v).flat_map(|(a, b)| [a, b]);
        for t in named.chain(pairs) {
            if !known.contains(t.as_str()) {
                return Err(TilingError::UnknownTile(t.clone()));
            }
        }
        for (i, a) in self.tiles.iter().enumerate() {
            for b in &self.tiles[i + 1..] {
                if rel_name(a) == rel_name(b) {
                    return Err(TilingError::Collision(a.clone(), b.clone()));
                }
            }
        }
        Ok(())
    }
}

fn rel_name(tile: &str) -> String {
    let s: String = tile.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
    format!("tile_{s}")
}

fn any_tile(spec: &TileSpec, i: &str, j: &str) -> String {
    let ts: Vec<String> = spec.tiles.iter().map(|t| format!("{}({i}, {j})", rel_name(t))).collect();
    format!("({})", ts.join(" | "))
}

fn one_of(names: &[&String], i: &str, j: &str) -> String {
    if names.is_empty() {
        return "false".into();
    }
    let ts: Vec<String> = names.iter().map(|t| format!("{}({i}, {j})", rel_name(t))).collect();
    format!("({})", ts.join(" | "))
}

/// `.bhz` source of the tiling system.
pub fn generate_source(spec: &TileSpec) -> Result<String, TilingError> {
    spec.validate()?;
    let tri = spec.variant == Variant::LowerTriangular;
    // Last column of row i.
    let row_end = |i: &str, j: &str| if tri { format!("{j} = {i}") } else { format!("{j} = max") };
    let mut s = String::new();
    let variant = if tri { "lower-triangular" } else { "finite-board" };
    let _ = writeln!(s, "# Tiling system ({variant}), {} tile types.\n", spec.tiles.len());
    s.push_str("relation lt(2)\nrelation pred(2)\nrelation M(2)\n");
    for t in &spec.tiles {
        let _ = writeln!(s, "relation {}(2)", rel_name(t));
    }
    if tri {
        s.push_str("relation P(2)\nrelation f(0)\n");
    }
    s.push_str("variable zero\n");
    if !tri {
        s.push_str("variable max\n");
    }
    s.push_str(
        "\naxiom forall x. ~(x < x)\n\
         axiom forall x, y, z. x < y & y < z -> x < z\n\
         axiom forall x, y. x < y | x = y | y < x\n\
         axiom forall x. zero <= x\n\
         axiom forall a, b, c. pred(a, b) -> a < b & ~(a < c & c < b)\n",
    );
    if !tri {
        s.push_str("axiom forall x. x <= max\n");
    }
    s.push('\n');
    let _ = writeln!(s, "init forall i, j. M(i, j) <-> i = zero & j = zero");
    for t in &spec.tiles {
        if *t == spec.start {
            let _ = writeln!(s, "init forall i, j. {}(i, j) <-> i = zero & j = zero", rel_name(t));
        } else {
            let _ = writeln!(s, "init forall i, j. ~{}(i, j)", rel_name(t));
        }
    }
    if tri {
        s.push_str("init forall i, j. P(i, j) <-> i = zero & j = zero\ninit f\n");
    }
    s.push('\n');

    let placed = |i: &str, j: &str| any_tile(spec, i, j);
    // (i, j) -> (ni, nj) is one step in board order.
    let succ = |i: &str, j: &str, ni: &str, nj: &str| {
        format!(
            "((~({end}) & {ni} = {i} & pred({j}, {nj})) | ({end} & pred({i}, {ni}) & {nj} = zero))",
            end = row_end(i, j)
        )
    };
    if tri {
        s.push_str("safety flag: f\n");
    } else {
        let _ = writeln!(s, "safety no_halt: forall i, j. ~{}(i, j)", rel_name(&spec.halt));
    }
    let _ = writeln!(s, "invariant one_max: forall i, j, k, l. M(i, j) & M(k, l) -> i = k & j = l");
    let _ = writeln!(s, "invariant max_placed: forall i, j. M(i, j) -> {}", placed("i", "j"));
    let _ = writeln!(
        s,
        "invariant nothing_after_max: forall i, j, k, l. M(i, j) & (i < k | (i = k & j < l)) -> ~{}",
        placed("k", "l")
    );
    if tri {
        let _ = writeln!(s, "invariant in_triangle: forall i, j. {} -> j <= i", placed("i", "j"));
    }
    for (n, a) in spec.tiles.iter().enumerate() {
        for b in &spec.tiles[n + 1..] {
            let _ = writeln!(s, "invariant unique_{}_{}: forall i, j. ~({}(i, j) & {}(i, j))", rel_name(a), rel_name(b), rel_name(a), rel_name(b));
        }
    }
    let h_fit: Vec<String> = spec
        .h
        .iter()
        .map(|(a, b)| format!("({}(i, j) & {}(ni, nj))", rel_name(a), rel_name(b)))
        .collect();
    let h_fit = if h_fit.is_empty() { "false".to_string() } else { format!("({})", h_fit.join(" | ")) };
    let _ = writeln!(
        s,
        "invariant has_successor: forall i, j. {} & ~M(i, j) -> exists ni, nj. {} & {} & ({} | {})",
        placed("i", "j"),
        succ("i", "j", "ni", "nj"),
        placed("ni", "nj"),
        row_end("i", "j"),
        h_fit
    );
    if tri {
        let _ = writeln!(
            s,
            "invariant p_step: forall i, j, ni, nj. {} & {} & {} & P(i, j) -> P(ni, nj)",
            placed("i", "j"),
            placed("ni", "nj"),
            succ("i", "j", "ni", "nj")
        );
    }
    s.push('\n');

    for t in &spec.tiles {
        let left: Vec<&String> = spec.h.iter().filter(|(_, b)| b == t).map(|(a, _)| a).collect();
        let up: Vec<&String> = spec.v.iter().filter(|(_, b)| b == t).map(|(a, _)| a).collect();
        let _ = writeln!(s, "action place_{}(ci, cj, ni, nj, ui) {{", &rel_name(t)[5..]);
        let _ = writeln!(s, "  assume M(ci, cj);");
        let _ = writeln!(s, "  assume {};", succ("ci", "cj", "ni", "nj"));
        let _ = writeln!(s, "  assume nj = zero | {};", one_of(&left, "ni", "cj"));
        let _ = writeln!(s, "  assume ni = zero | (pred(ui, ni) & {});", one_of(&up, "ui", "nj"));
        let _ = writeln!(s, "  {}.insert(ni, nj);", rel_name(t));
        let _ = writeln!(s, "  M(i, j) := i = ni & j = nj;");
        if tri {
            s.push_str("  if P(ci, cj) {\n    P.insert(ni, nj);\n  } else {\n    f.remove();\n  }\n");
        }
        s.push_str("}\n\n");
    }
    Ok(s)
}

pub fn generate_model(spec: &TileSpec) -> Result<ProgramModel, TilingError> {
    Ok(parse(&generate_source(spec)?)?)
}

/// Brute-force search for a halting tiling of a `rows × cols` board filled
/// in board order, used to confirm that a spec halts early.
pub fn halting_tiling_exists(spec: &TileSpec, rows: usize, cols: usize) -> bool {
    fn go(spec: &TileSpec, board: &mut Vec<usize>, rows: usize, cols: usize) -> bool {
        let n = board.len();
        if n > 0 && spec.tiles[board[n - 1]] == spec.halt {
            return true;
        }
        if n == rows * cols {
            return false;
        }
        let (i, j) = (n / cols, n % cols);
        for k in 0..spec.tiles.len() {
            if n == 0 && spec.tiles[k] != spec.start {
                continue;
            }
            let t = &spec.tiles[k];
            let h_ok = j == 0 || spec.h.iter().any(|(a, b)| *a == spec.tiles[board[n - 1]] && b == t);
            let v_ok = i == 0 || spec.v.iter().any(|(a, b)| *a == spec.tiles[board[n - cols]] && b == t);
            if h_ok && v_ok {
                board.push(k);
                if go(spec, board, rows, cols) {
                    return true;
                }
                board.pop();
            }
        }
        false
    }
    go(spec, &mut Vec::new(), rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{desugar, validate};

    pub(crate) fn halting_spec() -> TileSpec {
        TileSpec {
            tiles: vec!["start".into(), "halt".into()],
            start: "start".into(),
            halt: "halt".into(),
            h: vec![("start".into(), "halt".into())],
            v: vec![],
            variant: Variant::FiniteBoard,
        }
    }

    #[test]
    fn json_spec_round_trip() {
        let s = halting_spec();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"finiteBoard\""));
        assert_eq!(TileSpec::from_json(&j).unwrap(), s);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = halting_spec();
        s.h.push(("start".into(), "nope".into()));
        assert!(matches!(generate_source(&s), Err(TilingError::UnknownTile(_))));
        let empty = TileSpec { tiles: vec![], ..halting_spec() };
        assert!(matches!(generate_source(&empty), Err(TilingError::Empty)));
    }

    #[test]
    fn one_tile_spec_validates() {
        for variant in [Variant::FiniteBoard, Variant::LowerTriangular] {
            let s = TileSpec {
                tiles: vec!["t".into()],
                start: "t".into(),
                halt: "t".into(),
                h: vec![("t".into(), "t".into())],
                v: vec![("t".into(), "t".into())],
                variant,
            };
            let m = generate_model(&s).unwrap();
            assert!(validate(&m).is_empty());
            assert!(desugar(&m).is_ok());
        }
    }

    #[test]
    fn brute_force_finds_the_halt() {
        assert!(halting_tiling_exists(&halting_spec(), 1, 2));
        let mut s = halting_spec();
        s.h.clear();
        assert!(!halting_tiling_exists(&s, 2, 2));
    }
}
