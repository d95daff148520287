use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("charge and discharge are both positive at step {index}")]
    Complementarity { index: usize },

    #[error("negative or non-finite power at step {index}")]
    InvalidPower { index: usize },

    #[error("state of charge {value} leaves [{lower}, {upper}] at step {index}")]
    SocBound {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("depth {0} outside [0, 1]")]
    Domain(f64),

    #[error("stress function is not strictly convex")]
    NonConvexStress,

    #[error("enumeration budget exceeded: more than {budget} leaf evaluations")]
    BudgetExceeded { budget: u64 },

    #[error("trace has {steps} steps, oracle cap is {cap}")]
    TooManySteps { steps: usize, cap: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input")]
    Empty,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
