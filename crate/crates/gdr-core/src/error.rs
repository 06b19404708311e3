use thiserror::Error;

/// Errors surfaced by library operations.
///
/// Data-level problems in a scenario (bad row sums, out-of-range discounts)
/// are *not* errors; they are reported by [`crate::scenario::validate_scenario`]
/// as a list of violations. This enum covers contract breaches between caller
/// and library: bad parameters, exhausted budgets, diverging training runs.
#[derive(Debug, Error)]
pub enum GdrError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate likelihood: posterior mass vanished (all belief weights annihilated)")]
    DegenerateLikelihood,

    #[error(
        "resource budget exceeded: {what} requires more than the configured budget of {budget}"
    )]
    ResourceExceeded { what: String, budget: usize },

    #[error("training diverged at episode {episode}: max |Q| = {max_abs_q:.6e} exceeds 10x the value bound {bound:.6e}")]
    TrainingDiverged {
        episode: usize,
        max_abs_q: f64,
        bound: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("scenario file: {0}")]
    Io(#[from] std::io::Error),

    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GdrError>;
