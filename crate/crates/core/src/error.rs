use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The variants are grouped by how a caller is expected to react: bad inputs
/// and configurations are the caller's fault, protocol and integrity errors
/// mean a party saw something an honest execution never produces.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("division by zero in F_{modulus}")]
    DivisionByZero { modulus: u64 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("integrity error: reconstructed output {output} exceeds the input length bound")]
    Integrity { output: u64 },
    #[error("enumeration error: {0}")]
    Enumeration(String),
    #[error("harness deadlock: {stalled}")]
    Deadlock { stalled: String },
    #[error("enumeration cost {cost} exceeds cap {cap}")]
    CostExceeded { cost: String, cap: u64 },
    #[error("malformed message: {0}")]
    Wire(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }
}
