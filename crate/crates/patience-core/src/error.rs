use alloc::string::String;

/// Errors shared by all estimation and simulation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The input dataset cannot support the requested computation
    /// (empty, zero total exposure, single-class labels, ...).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A numeric routine failed (root not bracketed, Newton divergence,
    /// state-space truncation overflow, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A conversation event log violates the structural rules.
    #[error("malformed event log: {0}")]
    MalformedLog(String),

    /// Invalid argument outside the domain documented for the operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateData(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedLog(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
