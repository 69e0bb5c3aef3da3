use std::fmt;

/// Reasons a binary file was rejected by a loader.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FormatError {
    /// The leading 8 bytes are not a known magic.
    BadMagic,
    /// The magic family matches but the version suffix differs.
    VersionMismatch { found: String, expected: String },
    /// The file ended before the declared payload.
    Truncated { needed: usize, available: usize },
    /// Declared dimensions overflow or exceed the file size.
    DimensionOverflow { rows: u64, cols: u64 },
    /// Unknown dtype code in a block header.
    UnsupportedDtype(u32),
    /// A block had the wrong dtype or shape for its position.
    UnexpectedBlock(String),
    /// Bytes left over after the last block.
    TrailingBytes(usize),
    /// A stored value was NaN or infinite.
    NonFinite,
    /// Manifest text could not be parsed or violates its invariants.
    Manifest(String),
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadMagic => write!(f, "bad magic"),
            Self::VersionMismatch { found, expected } => {
                write!(f, "version mismatch: found {found}, expected {expected}")
            }
            Self::Truncated { needed, available } => {
                write!(f, "truncated payload: needed {needed} bytes, {available} available")
            }
            Self::DimensionOverflow { rows, cols } => {
                write!(f, "dimension overflow: {rows}x{cols}")
            }
            Self::UnsupportedDtype(code) => write!(f, "unsupported dtype code {code}"),
            Self::UnexpectedBlock(msg) => write!(f, "unexpected block: {msg}"),
            Self::TrailingBytes(n) => write!(f, "{n} trailing bytes after payload"),
            Self::NonFinite => write!(f, "non-finite value in payload"),
            Self::Manifest(msg) => write!(f, "invalid manifest: {msg}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("dimension mismatch: {0}")]
    DimensionError(String),
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("forget subspace fills the embedding space: {rows} rows (rank {rank}) in dimension {dim}")]
    ForgetSubspaceFull { rows: usize, rank: usize, dim: usize },
    #[error("unknown label: {0}")]
    UnknownLabel(String),
    #[error("synthesis target is not unit-norm (norm {0})")]
    InvalidTarget(f64),
    #[error("domain and global canonical embeddings coincide; residual is undefined")]
    DegenerateResidual,
    #[error("percentage out of range [0, 100]: {0}")]
    InvalidPercentage(f64),
    #[error("prototype rejection sampling gave up after {draws} draws")]
    PrototypeSamplingFailed { draws: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("format error: {0}")]
    Format(FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<FormatError> for Error {
    fn from(e: FormatError) -> Self {
        Error::Format(e)
    }
}

impl Error {
    /// True for failures of a numerical contract rather than bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ForgetSubspaceFull { .. }
                | Error::DegenerateResidual
                | Error::ZeroVector
                | Error::PrototypeSamplingFailed { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
