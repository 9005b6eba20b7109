use thiserror::Error;

/// Errors produced by estimation, bounding and data handling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no samples")]
    NoSamples,
    #[error("degenerate weights: importance ratios sum to zero")]
    DegenerateWeights,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("budget exceeded: key-point budgets sum to {total} > delta = {delta}")]
    BudgetExceeded { total: f64, delta: f64 },
    #[error("insufficient replicates: {got} < {min}")]
    InsufficientReplicates { got: usize, min: usize },
    #[error("degenerate basis: design matrix is rank deficient")]
    DegenerateBasis,
    #[error("band forces point mass at {at}")]
    ForcedPointMass { at: f64 },
    #[error("support violation at episode {episode}, step {step}: evaluation policy takes an action the behavior policy cannot")]
    SupportViolation { episode: u64, step: usize },
    #[error("episode index error: {0}")]
    EpisodeIndex(String),
    #[error("enumeration too large: more than {limit} trajectories")]
    EnumerationTooLarge { limit: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
