use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("value iteration did not converge after {iterations} sweeps (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("index out of range: {what} = {index} (limit {limit})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("environment already terminal; reset before stepping")]
    SteppedTerminal,

    #[error("lives increased from {prev} to {now} within a game")]
    LivesIncreased { prev: u32, now: u32 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("backward called without a cached forward pass")]
    NoForwardCache,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("replay memory holds {size} experiences, cannot sample {requested}")]
    InsufficientSamples { size: usize, requested: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
