use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityDomain(f64),

    #[error("{0}")]
    Domain(String),

    #[error("tail indices differ ({left} vs {right}); margins do not have equivalent tails")]
    TailIndexMismatch { left: f64, right: f64 },

    #[error("cannot compare tails of different families ({left} vs {right})")]
    FamilyMismatch {
        left: &'static str,
        right: &'static str,
    },

    #[error("order statistic index k={k} out of range for n={n}")]
    Bounds { k: usize, n: usize },

    #[error("estimated extreme value index {gamma_hat} >= 1: first moment not supported")]
    TailTooHeavy { gamma_hat: f64 },

    #[error("integral diverges: tail index {0} <= 1")]
    Divergent(f64),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("at alpha = {alpha}: {source}")]
    AtLevel {
        alpha: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("tail dependence function rejected: {0}")]
    InvalidLambda(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
