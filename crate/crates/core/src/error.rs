use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("bit at position {position} has value {value}, expected 0 or 1")]
    InvalidBit { position: usize, value: u8 },

    #[error("packet length {0} is not a multiple of 8")]
    NotByteAligned(usize),

    #[error("empty payload")]
    EmptyPayload,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("soft input length {0} is not 2 x (payload + 6) for a nonempty payload")]
    SoftLength(usize),

    #[error("odd codeword length {0} cannot be QPSK modulated")]
    OddLength(usize),

    #[error("LLR at position {0} is not finite")]
    NonFiniteLlr(usize),

    #[error("invalid MAC code parameters: {0}")]
    MacSpec(String),

    #[error("duplicate packet index {0}")]
    DuplicateIndex(usize),

    #[error("packet index {index} out of range for {total} coded packets")]
    IndexOutOfRange { index: usize, total: usize },

    #[error("channel setup: {0}")]
    Channel(String),

    #[error("label {0:#06b} is not scheduled for this profile")]
    UnscheduledLabel(u8),

    #[error("inconsistent equations: label {0:#06b} derived with two different packets")]
    Inconsistent(u8),

    #[error("invalid Zadoff-Chu parameters: {0}")]
    ZadoffChu(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
