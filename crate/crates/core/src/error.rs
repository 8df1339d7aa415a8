use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModShiftError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("divergence: non-finite weights for agent {agent} in round {round}")]
    Divergence { agent: usize, round: usize },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("shift constraint violated: gamma entries sum to {sum}, expected -1")]
    ConstraintViolation { sum: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix determinant lemma needs an invertible base matrix (diagonal value is zero)")]
    SingularBase,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl ModShiftError {
    /// Whether the error stems from the supplied configuration (CLI exit code 2)
    /// rather than from a failure while running (exit code 1).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ModShiftError::Config(_)
                | ModShiftError::ConstraintViolation { .. }
                | ModShiftError::Usage(_)
                | ModShiftError::Json(_)
        )
    }
}

pub type Result<T, E = ModShiftError> = std::result::Result<T, E>;
