use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A precondition or type invariant was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The request is valid but exceeds a fixed computational budget.
    #[error("budget exceeded: {what} = {requested} exceeds limit {limit}")]
    Budget {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    /// The operation has no meaning for this parameter regime.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
