use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One Gauss–Newton iterate, kept for non-convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("fit did not converge after {} iterations", trace.len())]
    NonConvergence { trace: Vec<IterationRecord> },

    #[error("indeterminate fit: {0}")]
    Indeterminate(String),

    #[error("uncertainty estimation failed: {failed} of {total} resample fits failed")]
    Uncertainty { failed: usize, total: usize },
}

pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}
