use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants split into two families that the CLI maps onto different exit
/// codes: input validation problems and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown material '{name}' (known: {})", known.join(", "))]
    UnknownMaterial { name: String, known: Vec<String> },

    #[error("grid does not enclose the structure: {0}")]
    GridTooSmall(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("extracted R*eta = {r_eta:.6} exceeds facet reflectance R = {reflectance:.6}; the assumed R is wrong (gain-like result)")]
    GainLike { r_eta: f64, reflectance: f64 },

    #[error("inconsistent measurement data: {message} (residual {residual:.3e})")]
    Inconsistent { message: String, residual: f64 },

    #[error("underdetermined measurement set: {0}")]
    Underdetermined(String),

    #[error("matrix is not positive definite at pivot {0}")]
    NotPositiveDefinite(usize),

    #[error("at z = {z_um} um: {source}")]
    AtTaperPosition {
        z_um: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True when the failure is numerical rather than a bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. }
            | Error::NotPositiveDefinite(_)
            | Error::Inconsistent { .. }
            | Error::GainLike { .. } => true,
            Error::AtTaperPosition { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }
}

/// Early-return with [`Error::Invalid`] unless `cond` holds. A NaN
/// operand fails the check.
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Invalid(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
