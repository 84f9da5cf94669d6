use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Validation(String),
    /// The instance has no feasible plan, detected before or during the solve.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// The numerical engine failed to produce a trustworthy answer.
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CoreError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CoreError::Validation(msg.into())
    }

    /// Process exit code: 3 for solver failures, 2 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::Solver(_) => 3,
            _ => 2,
        }
    }
}

impl From<chargesite_conic::ProgramError> for CoreError {
    fn from(e: chargesite_conic::ProgramError) -> Self {
        CoreError::Solver(format!("malformed program: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
