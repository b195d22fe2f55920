//! Named tree fixtures, embedded so every documented example is runnable.
//!
//! The same documents ship as files under `fixtures/` for use with the CLI.

use crate::tree::{DependencyTree, TreeDoc};

pub const WORKED_EXAMPLE_D5_JSON: &str = include_str!("../fixtures/worked_d5.json");
pub const PAIRWISE_D4_JSON: &str = include_str!("../fixtures/pairwise_d4.json");
pub const NESTED_D5_JSON: &str = include_str!("../fixtures/nested_d5.json");

fn parse(json: &str) -> DependencyTree {
    let doc: TreeDoc = serde_json::from_str(json).expect("fixture parses");
    doc.into_tree().expect("fixture validates")
}

/// The five-dimensional worked family used throughout the guide:
/// ten internal vertices 11001, 11101, 11111, 10001, 01100, 01010, 01001,
/// 01110, 01101, 01111 plus the five leaves.
pub fn worked_example_d5() -> DependencyTree {
    parse(WORKED_EXAMPLE_D5_JSON)
}

/// Flat structure in dimension 4: `node(k, l) = {k, l}`.
pub fn pairwise_d4() -> DependencyTree {
    parse(PAIRWISE_D4_JSON)
}

/// Nested-prefix structure in dimension 5: `node(i, j) = {1..i} ∪ {j}`.
pub fn nested_d5() -> DependencyTree {
    parse(NESTED_D5_JSON)
}
