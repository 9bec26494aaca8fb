use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("trace has imaginary part {imag:e}, above the 1e-10 consistency bound")]
    NumericalConsistency { imag: f64 },

    #[error("positivity violation: eigenvalue {eigenvalue:e} is below the repair tolerance")]
    PositivityViolation { eigenvalue: f64 },

    #[error("degenerate state: trace {trace:e}")]
    DegenerateState { trace: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("noise coefficients admit no classical version: {0}")]
    ClassicalityViolation(String),

    #[error("covariance Gram matrix is indefinite (pivot {pivot:e})")]
    InvalidCovariance { pivot: f64 },

    #[error("step too coarse: per-step event probability {probability} exceeds 0.1")]
    StepTooCoarse { probability: f64 },

    #[error("invalid transition kernel: {0}")]
    InvalidKernel(String),

    #[error("count observed with vanishing predicted intensity {intensity:e}")]
    ZeroRateJump { intensity: f64 },

    #[error("degenerate Bayes update: normalization {norm:e}")]
    DegenerateUpdate { norm: f64 },

    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep { step, source: Box::new(e) },
        }
    }

    /// Strips any step annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
