use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("edge ({i}, {j}) has negative weight {weight}")]
    NegativeWeight { i: usize, j: usize, weight: f64 },

    #[error("edge ({i}, {j}) is not valid: {reason}")]
    InvalidEdge { i: usize, j: usize, reason: String },

    #[error("duplicate edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },

    #[error("pairwise potential on ({i}, {j}) is not submodular (violation {excess})")]
    NotSubmodular { i: usize, j: usize, excess: f64 },

    #[error("chain is empty")]
    EmptyChain,

    #[error("chain weight {index} is invalid: {weight}")]
    InvalidChainWeight { index: usize, weight: f64 },

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("node {node} is covered by no class but has unary weight {weight}")]
    Unrepresentable { node: usize, weight: f64 },

    #[error("instance with {n} nodes exceeds the limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("dual state fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
