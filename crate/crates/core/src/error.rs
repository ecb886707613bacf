use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Probability mass escaped the truncated Fock space.
    #[error("Fock truncation: {lost:.3e} of the norm lies beyond cutoff {cutoff} (tolerance {tolerance:.1e})")]
    Truncation {
        cutoff: usize,
        lost: f64,
        tolerance: f64,
    },

    #[error("box lies outside the no-signaling polytope (best L1 residual {best_residual:.3e}, epsilon {epsilon:.1e})")]
    NotInPolytope { best_residual: f64, epsilon: f64 },

    #[error("no records for setting pair ({x}, {y}); cannot estimate that cell")]
    EmptyCell { x: &'static str, y: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
