use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A response value lies outside the support of the family.
    #[error("support error: {0}")]
    Support(String),

    /// Model specification is inconsistent (family/link/mechanism mismatch, bad dimensions).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Input data violates the dataset schema.
    #[error("schema error at row {row}, column '{column}': {message}")]
    Schema {
        row: usize,
        column: String,
        message: String,
    },

    #[error("design matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:.3e}): {context}")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        context: String,
    },

    #[error("quadrature did not reach tolerance (achieved {achieved:.3e})")]
    Quadrature { achieved: f64 },

    #[error("observed information is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    pub(crate) fn schema(row: usize, column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            row,
            column: column.into(),
            message: message.into(),
        }
    }
}
