use thiserror::Error;

pub type LabResult<T> = Result<T, LabError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("singularity error: {0}")]
    Singularity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("truncation error: {0}")]
    Truncation(String),
}

impl LabError {
    /// Errors caused by the numbers rather than by the shape of the request.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LabError::Structure(_) | LabError::Singularity(_) | LabError::Truncation(_)
        )
    }
}
