use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value {value} produced at t = {t}")]
    NonFinite { t: f64, value: f64 },

    #[error("derivative estimate failed: {reason} (residual {residual:e})")]
    Estimation { reason: String, residual: f64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no positive zero found before t = {horizon}")]
    Divergence { horizon: f64 },

    #[error("infeasible barrier budget: {0}")]
    Infeasible(String),

    #[error("not a member of the barrier set: {0}")]
    NotMember(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("root not found: {0}")]
    NoRoot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
