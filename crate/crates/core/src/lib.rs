//! Bounded-Horizon checking of inductive invariants for relational
//! transition systems.

pub mod fol;
pub mod solver;
pub mod frontend;
pub mod vcgen;
pub mod horizon;
pub mod models;
pub mod checker;
pub mod instrument;
pub mod tiling;
