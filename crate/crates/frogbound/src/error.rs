/// Error type shared by all subsystems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric or structural precondition on an argument was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A threshold-law string did not match the `delta:K` / `pmf:...` grammar
    /// or described an invalid law.
    #[error("invalid threshold spec: {0}")]
    ThresholdSpec(String),

    /// An exact enumeration was requested beyond the supported budget.
    #[error("enumeration budget exceeded: {0}")]
    EnumerationBudget(String),

    /// An exact guard that certificate soundness rests on failed; the message
    /// carries the witness.
    #[error("soundness guard failed: {0}")]
    Soundness(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
