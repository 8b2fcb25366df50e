use thiserror::Error;

#[derive(Debug, Error)]
pub enum EcoError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} index {index} out of range {lo}..={hi}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        lo: usize,
        hi: usize,
    },

    /// A slot with no participating data; the bound is undefined there.
    #[error("slot {slot} has no participating data")]
    EmptySlot { slot: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("participation plan violates the floor of {a_min} in slot {slot} ({count} participants)")]
    ParticipationFloor { slot: usize, count: usize, a_min: usize },

    #[error("non-finite reference point: {0}")]
    NonFinite(&'static str),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("program infeasible at the first iterate: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = EcoError> = std::result::Result<T, E>;
