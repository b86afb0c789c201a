use thiserror::Error;

/// Errors raised anywhere in the assimilation toolkit.
#[derive(Debug, Error)]
pub enum HdaError {
    #[error("grid {nlat}x{nlon} is too coarse for truncation T{truncation}")]
    GridTooCoarse {
        nlat: usize,
        nlon: usize,
        truncation: usize,
    },
    #[error("cannot truncate from T{from} up to T{to}")]
    TruncationIncrease { from: usize, to: usize },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("index {index} out of range for {what} of size {len}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("non-finite state after step {step}")]
    NonFinite { step: usize },
    #[error("blow-up in window {window}: {source}")]
    WindowFailed {
        window: usize,
        #[source]
        source: Box<HdaError>,
    },
    #[error("zero standard deviation in channel {channel}")]
    ZeroStd { channel: usize },
    #[error("malformed file at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("need more than {train} days, got {total}")]
    InsufficientDays { total: usize, train: usize },
    #[error("archive has {got} windows, need at least {need}")]
    EmptyArchive { got: usize, need: usize },
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("covariance matrix is singular or not positive definite (min eigenvalue {min_eigenvalue:e})")]
    CovarianceSingular { min_eigenvalue: f64 },
    #[error("experiments disagree on {0}")]
    Mismatched(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HdaError {
    /// True for failures of the numerics (blow-up, singular covariances)
    /// rather than of inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        match self {
            HdaError::NonFinite { .. } | HdaError::CovarianceSingular { .. } => true,
            HdaError::WindowFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = HdaError> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(HdaError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
