use thiserror::Error;

use crate::rational::Rational;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid exponents: need 1 <= alpha < beta, got alpha={alpha}, beta={beta}")]
    InvalidExponents { alpha: u32, beta: u32 },

    #[error("invalid delta {0}: need 0 < delta < 1")]
    InvalidDelta(Rational),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("sequence fails the dyadic-sequence lemma at n={index}: {detail}")]
    SeqInvalid { index: usize, detail: String },

    #[error("x={x} lies below the resolution 2^-{depth}")]
    BelowResolution { x: Rational, depth: usize },

    #[error("x={0} lies outside [0,1]")]
    OutOfDomain(Rational),

    #[error("grid violation at x={x}, y={y}{}", .n.map(|n| format!(", n={n}")).unwrap_or_default())]
    GridViolation { x: Rational, y: Rational, n: Option<usize> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("kappa is not well defined at n={0}: u_n - lambda*u_(n-1) outside [0,1]")]
    NotWellDefined(usize),

    #[error("witness search at level {level}, string #{string} exceeded the cap of {cap} steps")]
    SearchCapExceeded { level: usize, string: usize, cap: usize },

    #[error("level {requested} unavailable (tree built to level {built})")]
    LevelUnavailable { requested: usize, built: usize },

    #[error("strings are not distinct")]
    NotDistinct,

    #[error("index {n} exceeds depth {depth}")]
    DepthExceeded { n: usize, depth: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("archive rejected: {0}")]
    ArchiveRejected(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidExponents { .. } => "InvalidExponents",
            Error::InvalidDelta(_) => "InvalidDelta",
            Error::InvalidParams(_) => "InvalidParams",
            Error::SeqInvalid { .. } => "SeqInvalid",
            Error::BelowResolution { .. } => "BelowResolution",
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::GridViolation { .. } => "GridViolation",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::NotWellDefined(_) => "NotWellDefined",
            Error::SearchCapExceeded { .. } => "SearchCapExceeded",
            Error::LevelUnavailable { .. } => "LevelUnavailable",
            Error::NotDistinct => "NotDistinct",
            Error::DepthExceeded { .. } => "DepthExceeded",
            Error::Parse(_) => "Parse",
            Error::ArchiveRejected(_) => "ArchiveRejected",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
