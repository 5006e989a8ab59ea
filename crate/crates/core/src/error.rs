use thiserror::Error;

/// Everything that can go wrong inside the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain violated: {0}")]
    ParameterDomain(String),

    #[error("singular domain: {0}")]
    SingularDomain(String),

    #[error("extrapolation outside the grid: {0}")]
    Extrapolation(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("unsupported geometry: {0}")]
    Capability(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("ill-conditioned spectral cluster: {0}")]
    Conditioning(String),

    #[error("overflow at s = {s}: {detail}")]
    Overflow { s: f64, detail: String },

    #[error("step size underflow at s = {s} (step {step:e})")]
    StepUnderflow { s: f64, step: f64 },

    #[error("integrand tail does not decay: {0}")]
    TailDivergence(String),

    #[error("fixed point iteration is not contracting; ratios {ratios:?}")]
    ContractionFailure { ratios: Vec<f64> },

    #[error("parameter shooting failed after {iterations} iterations; amplitude history {history:?}")]
    ShootingFailure { iterations: usize, history: Vec<Vec<f64>> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("classification inconsistent: {0}")]
    Inconsistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
