use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RodError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("point lies on the curve image")]
    OnCurve,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("grid invalid: {0}")]
    GridInvalid(String),
    #[error("degeneracy: {0}")]
    Degeneracy(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("budget exhausted: {what} (achieved {achieved:.3e})")]
    Budget { what: String, achieved: f64 },
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl RodError {
    /// Exit-code class used by the CLI: 1 for violated preconditions, 2 for
    /// failed constructions.
    pub fn exit_class(&self) -> i32 {
        match self {
            RodError::Construction(_)
            | RodError::Budget { .. }
            | RodError::Degeneracy(_)
            | RodError::GridInvalid(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, RodError>;
