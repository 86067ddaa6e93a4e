use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical routine failed or produced an out-of-tolerance result.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The request exceeds a hard size guard (memory or combinatorial blow-up).
    #[error("resource guard: {0}")]
    ResourceGuard(String),

    /// Posterior could not be normalized because the likelihood vanishes everywhere.
    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
