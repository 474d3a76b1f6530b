use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmmError {
    #[error("unknown token {token:?} at position {position}")]
    UnknownToken { position: usize, token: char },

    #[error("alphabet is invalid: {0}")]
    InvalidAlphabet(String),

    #[error("sequence too short: {len} observations, order {order} needs at least {needed}")]
    SequenceTooShort {
        len: usize,
        order: usize,
        needed: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("solver did not converge after {iterations} iterations (relative gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("group {0} has no observed transitions")]
    EmptyGroup(usize),

    #[error("partitions cover different element sets ({left} vs {right} elements)")]
    MismatchedElements { left: usize, right: usize },

    #[error("lambda_min is undefined: condition (A2) fails for pair ({i}, {j}) in cluster {cluster}")]
    UndefinedBound { cluster: usize, i: usize, j: usize },

    #[error("quantity needs at least two clusters")]
    SingleCluster,

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("segment too short: length {len}, order {order}")]
    SegmentTooShort { len: usize, order: usize },

    #[error("model error: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, SmmError>;
