use std::fmt;

use vstent_core::pipeline::PipelineError;
use vstent_core::DeploymentError;

/// A command failure and the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values. Exit 2.
    Usage(String),
    /// Output was written but fails the validity check. Exit 3.
    Invalid(String),
    /// Anything else. Exit 1.
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Invalid(_) => 3,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) => f.write_str(m),
            CliError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failed(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Deployment(DeploymentError::InvalidParams(m)) => CliError::Usage(m),
            other => CliError::Failed(other.into()),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Invalid("x".into()).exit_code(), 3);
        assert_eq!(CliError::Failed(anyhow::anyhow!("x")).exit_code(), 1);
    }

    #[test]
    fn parameter_errors_are_usage_errors() {
        let e: CliError = PipelineError::Deployment(DeploymentError::InvalidParams("dr must be > 0".into())).into();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.to_string(), "dr must be > 0");
    }
}
