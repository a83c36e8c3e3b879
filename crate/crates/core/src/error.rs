use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad arguments: out-of-range indices, malformed parameters, mismatched sizes.
    #[error("usage error: {0}")]
    Usage(String),

    /// A projection onto an outcome with (numerically) zero probability.
    #[error("infeasible branch: {0}")]
    InfeasibleBranch(String),

    /// Sampling was requested without a seed.
    #[error("sample mode requires a seed")]
    MissingSeed,

    /// The dense register or a lookup table would exceed the configured cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A fit or analysis has no meaningful answer for the given input.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
