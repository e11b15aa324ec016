use thiserror::Error;

use crate::runge::ApproxReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("radix entry {value} at position {index} is below 2")]
    InvalidRadix { index: usize, value: u64 },

    #[error("radix sequence is empty")]
    EmptyRadix,

    #[error("requested level {requested} but only {available} levels are available")]
    Depth { requested: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("regions are not at positive distance: {0}")]
    Overlap(String),

    #[error("cubes {0} and {1} are not disjoint")]
    NotDisjoint(usize, usize),

    #[error("approximation failed ({context}): best error {best} at degree {degree}, target {target}")]
    Approximation {
        context: String,
        best: f64,
        degree: usize,
        target: f64,
        report: Box<ApproxReport>,
    },

    #[error("malformed certificate: {0}")]
    Certificate(String),

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("tower parameters rejected: {0}")]
    TowerParameter(String),

    #[error("point outside the required domain: {0}")]
    Domain(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("stage {stage}, cell {cell}: {source}")]
    Stage {
        stage: usize,
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage {stage}: error-set estimate {estimate} is not below the budget {budget}")]
    Budget {
        stage: usize,
        estimate: String,
        budget: String,
    },

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}
