use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, inconsistent dimensions, unsupported structure.
    Usage,
    /// Singular systems, non-finite values, undefined metrics.
    Numerical,
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("objective became non-finite after {} evaluations", trace.len())]
    NonFinite { trace: Vec<f64> },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Dimension(_) | Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Singular(_) | Error::NonFinite { .. } | Error::UndefinedMetric(_) => {
                ErrorKind::Numerical
            }
        }
    }
}

macro_rules! ensure_dims {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Dimension(format!($($arg)+)));
        }
    };
}

macro_rules! ensure_arg {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::InvalidArgument(format!($($arg)+)));
        }
    };
}

pub(crate) use ensure_arg;
pub(crate) use ensure_dims;
