use spinepatch::annotations::ManifestError;
use spinepatch::classifier::ClassifierError;
use spinepatch::pipeline::PipelineError;
use thiserror::Error;

/// Everything a subcommand can fail with, bucketed by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad data or a missing prerequisite step.
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        match e {
            ManifestError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<spinepatch::raster::ImageError> for CliError {
    fn from(e: spinepatch::raster::ImageError) -> Self {
        PipelineError::from(e).into()
    }
}
