use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("argument p = {p} lies outside the support [{lo}, {hi}]")]
    OutsideSupport { p: f64, lo: f64, hi: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("decomposition requires finite alphabet")]
    MissingAlphabet,

    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
