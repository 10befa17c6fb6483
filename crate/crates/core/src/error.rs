use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The data do not satisfy a method's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The data carry no information for the requested quantity.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// A numerical solver failed to bracket or converge.
    #[error("solver failure: {0}")]
    Solver(String),

    /// The simulator or an exact evaluation exceeded a configured cap.
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    /// Malformed input file.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
