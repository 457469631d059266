use thiserror::Error;

use crate::rates::Regime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("self-loop at vertex {label}")]
    SelfLoop { label: u64 },
    #[error("graph has no edges")]
    NoEdges,
    #[error("duplicate vertex label {0}")]
    DuplicateLabel(u64),
    #[error("unknown vertex label {0}")]
    UnknownLabel(u64),
    #[error("vertex index {0} out of range")]
    VertexOutOfRange(usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph is not complete")]
    NotComplete,
    #[error("vertices do not form a clique")]
    NotAClique,
    #[error("vertices do not form a maximal clique")]
    NotMaximalClique,
    #[error("clique is not a final maximal clique for the given state")]
    NotFinal,
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("interaction coefficient given for non-adjacent pair ({0}, {1})")]
    NonEdgeCoefficient(usize, usize),
    #[error("operation requires the {expected} regime, parameters are {found:?}")]
    RegimeMismatch {
        expected: &'static str,
        found: Regime,
    },
    #[error("enumeration needs {needed} items, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("trajectory has no allocations")]
    EmptyTrajectory,
    #[error("vertex {0} has zero particles")]
    ZeroCount(usize),
    #[error("no replicas requested")]
    NoReplicas,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
