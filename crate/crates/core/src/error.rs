use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter is outside its admissible range (p <= 2, epsilon not in (0, 1), ...).
    #[error("parameter domain error: {0}")]
    ParameterDomain(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A query fell outside the region where a field or grid is defined.
    #[error("out of coverage: {0}")]
    OutOfCoverage(String),

    /// An operation was called with inputs violating its stated precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input (configuration or parameters)
    /// rather than by a failed run.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::ParameterDomain(_)
                | Error::Geometry(_)
                | Error::Dimension { .. }
                | Error::NonFinite(_)
                | Error::Precondition(_)
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}
