use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("scenario failed validation: {0}")]
    ValidationFailed(String),

    #[error("design matrix is singular (lambda_min = {lambda_min:e})")]
    SingularDesign { lambda_min: f64 },

    #[error("GS pointer overflow for agent {agent}: pointer would exceed N = {n}")]
    PointerOverflow { agent: usize, n: usize },

    #[error("ranking domain mismatch: {left} vs {right} items")]
    DomainMismatch { left: usize, right: usize },

    #[error("agents mix algorithm variants in one lockstep round")]
    InconsistentVariant,

    #[error("unknown algorithm `{0}` (expected etpgs, ietpgs or cdetpgs)")]
    UnknownAlgorithm(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
