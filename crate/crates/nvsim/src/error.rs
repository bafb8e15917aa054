//! Library-level error type.

/// Errors from simulation and analysis routines.
#[derive(Debug, thiserror::Error)]
pub enum NvError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("source is outside its validity regime: theta = {theta:.3e}, expected {expected}")]
    WrongRegime { theta: f64, expected: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}
