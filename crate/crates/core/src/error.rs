use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative numerical method stopped before reaching its tolerance.
    #[error("numerical failure in {context}: achieved {achieved:.3e}, requested {requested:.3e}")]
    NumericalFailure {
        context: String,
        achieved: f64,
        requested: f64,
    },

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    /// A table or state space would exceed the configured memory bound.
    #[error("resource limit: {what}; try {suggestion}")]
    Resource { what: String, suggestion: String },

    /// A first-return orbit did not come back within the iteration cap.
    #[error("orbit from {start} did not return within {cap} iterations")]
    NonReturn { start: f64, cap: u64 },

    #[error("sampler efficiency: {0}")]
    Efficiency(String),

    #[error("range error: {0}")]
    Range(String),
}

impl LabError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LabError::Domain(msg.into())
    }
}
