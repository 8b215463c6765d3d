use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("codeword enumeration needs {tuples} tuples, above the cap of {cap}")]
    TooManyTuples { tuples: u128, cap: u128 },

    #[error("only {available} tuples available for {required} codewords")]
    InsufficientTuples { available: u128, required: u128 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
