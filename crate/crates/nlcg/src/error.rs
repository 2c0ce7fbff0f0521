use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition
    /// (shape mismatch, out-of-range action, non-finite input, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configured resource cap would be exceeded; `cap` names the cap.
    #[error("{cap} cap exceeded: {detail}")]
    CapExceeded { cap: &'static str, detail: String },

    /// An operation was called in a state that does not admit it.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// An exact integer computation would overflow; never silently wraps.
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
