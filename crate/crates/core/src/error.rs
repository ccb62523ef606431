use thiserror::Error;

pub type Result<T> = std::result::Result<T, AfssenError>;

#[derive(Debug, Error)]
pub enum AfssenError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("Cholesky factorization failed even with jitter {jitter:e}")]
    CholeskyFailed { jitter: f64 },

    #[error("norm equation requires ‖c‖ > b, got ‖c‖ = {norm:e} and b = {threshold:e}")]
    RootContract { norm: f64, threshold: f64 },

    #[error("objective became non-finite after {iterations} sweeps")]
    Divergence { iterations: usize },

    #[error("design restricted to the support is ill-conditioned (smallest eigenvalue {sigma_min:e})")]
    IllConditioned { sigma_min: f64 },

    #[error("ground truth is required for this operation")]
    MissingTruth,

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
