//! Error type carrying the process exit code contract:
//! 0 success, 2 config error, 3 numerical error, 4 partial sweep failure.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("sweep completed with {failed} failed point(s); see the error column")]
    PartialSweep { failed: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::PartialSweep { .. } => 4,
        }
    }
}

impl From<dofkit::geometry::GeometryError> for CliError {
    fn from(e: dofkit::geometry::GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<dofkit::operator::OperatorError> for CliError {
    fn from(e: dofkit::operator::OperatorError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<dofkit::spectrum::SpectralError> for CliError {
    fn from(e: dofkit::spectrum::SpectralError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<dofkit::dof::DofError> for CliError {
    fn from(e: dofkit::dof::DofError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
