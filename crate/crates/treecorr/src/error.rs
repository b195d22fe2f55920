//! Crate error type.

use thiserror::Error;

use crate::covariance::FeasibilityReport;
use crate::tree::TreeDefect;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("order violation: {0}")]
    OrderViolation(String),

    #[error("invalid dependence tree ({} defects)", .defects.len())]
    InvalidTree { defects: Vec<TreeDefect> },

    #[error("covariance not representable on this tree: {detail}")]
    NotRepresentable { detail: String },

    #[error("infeasible decomposition for {family}: {} defects", .report.defects.len())]
    InfeasibleDecomposition {
        family: String,
        report: FeasibilityReport,
    },

    #[error("enumeration budget exceeded: needs {needed} states, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("unsupported family {family} for {operation}")]
    UnsupportedFamily { family: String, operation: String },

    #[error("family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("mean mismatch at component {index}: {left} vs {right}")]
    MeanMismatch {
        index: usize,
        left: String,
        right: String,
    },

    #[error("internal consistency check failed in {context}: {detail}")]
    Inconsistency { context: String, detail: String },

    #[error("test function invalid: {0}")]
    InvalidTestFunction(String),

    #[error("coupling unavailable at ({k},{l}): {reason}")]
    CouplingUnavailable { k: usize, l: usize, reason: String },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("numerical failure in LP solve: {0}")]
    NumericalFailure(String),

    #[error("captured mass too low for the tolerance: defects x={defect_x:e}, y={defect_y:e}, max allowed {allowed:e}")]
    DegenerateMass {
        defect_x: f64,
        defect_y: f64,
        allowed: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
