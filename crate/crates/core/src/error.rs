use thiserror::Error;

/// Errors produced by game construction, policies, solvers and harnesses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("utility {value} at node {node} lies outside [0, 1]")]
    UtilityOutOfRange { node: usize, value: f64 },
    #[error("inner node {node} declares {rows}x{cols} actions; both counts must be at least 1")]
    EmptyActionSet { node: usize, rows: usize, cols: usize },
    #[error("inner node {node} has {found} children, expected {expected}")]
    ChildCount {
        node: usize,
        expected: usize,
        found: usize,
    },
    #[error("declared depth {declared} does not match tree depth {actual}")]
    DepthMismatch { declared: usize, actual: usize },
    #[error("the root of a game must be an inner state")]
    TerminalRoot,
    #[error("no strategy for player {player} at node {node}")]
    MissingStrategy { player: u8, node: usize },
    #[error("strategy at node {node} has {found} entries, expected {expected}")]
    StrategyShape {
        node: usize,
        expected: usize,
        found: usize,
    },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operation needs at least one iteration")]
    NoIterations,
    #[error("error model exceeded its bound at step {step}: |{observed} - {base}| >= {eta}")]
    ErrorBoundViolated {
        step: u64,
        observed: f64,
        base: f64,
        eta: f64,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
