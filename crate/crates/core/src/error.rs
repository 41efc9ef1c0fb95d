use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhiError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("audit failed: {0}")]
    Audit(String),
    #[error("contraction budget exceeded: proxy {proxy:.4} at eps={eps}, T={t_window}; {hint}")]
    ContractionBudget {
        proxy: f64,
        eps: f64,
        t_window: f64,
        hint: String,
    },
    #[error("gluing mismatch: {0}")]
    Gluing(String),
    #[error("no convergence: {message}; gaps = {gaps:?}")]
    NoConvergence { message: String, gaps: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, PhiError>;
