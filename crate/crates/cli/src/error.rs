use std::fmt;

use photolyase_core::Error as CoreError;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Fit(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Fit(_) => 4,
        }
    }

    /// Core errors raised while validating configured values.
    pub fn from_config(err: CoreError) -> Self {
        Self::Config(err.to_string())
    }

    /// Core errors raised while estimating from measurement data.
    pub fn from_estimation(err: CoreError) -> Self {
        match err {
            CoreError::Input(_) => Self::Data(err.to_string()),
            CoreError::Domain(_) => Self::Config(err.to_string()),
            CoreError::NonConvergence { ref trace } => {
                let tail: Vec<String> = trace
                    .iter()
                    .rev()
                    .take(3)
                    .map(|r| format!("iter {} cost {:e} params {:?}", r.iteration, r.cost, r.params))
                    .collect();
                Self::Fit(format!("{err}; last iterates: {}", tail.join("; ")))
            }
            _ => Self::Fit(err.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Fit(m) => write!(f, "fit failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
