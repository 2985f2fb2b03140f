use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid basis state {state} for n = {n}")]
    InvalidState { state: String, n: usize },

    #[error("qubit-resonator detuning is zero; the decoupling conditions are singular")]
    Resonant,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not {kind} (deviation {deviation:e})")]
    NotStructured { kind: &'static str, deviation: f64 },

    #[error("solver did not converge ({reason}); last off-diagonal residual {residual:e}")]
    SolverFailure { reason: String, residual: f64 },

    #[error("|cos q| = {cos_q:.3e} is too small for the sec q closed forms")]
    SecantSingularity { cos_q: f64 },

    #[error("effective frequencies are undefined for n = 1")]
    UndefinedFrequencies,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("coefficient vector is not normalized (norm^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("full-space builder limited to n <= {max}, got {n}")]
    DimensionLimit { n: usize, max: usize },

    #[error("transform angles carry no eta; run the second-stage solve first")]
    MissingEta,
}
