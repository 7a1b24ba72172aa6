use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}` ({value}): expected {expected}")]
    InvalidParameter {
        field: &'static str,
        value: String,
        expected: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("unsupported spin quantum number {0}; only 1/2 and 1 are available")]
    UnsupportedSpin(f64),

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("time step {dt:.3e} s is longer than segment `{label}` ({duration:.3e} s)")]
    StepTooLarge { dt: f64, label: String, duration: f64 },

    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, value: impl ToString, expected: &'static str) -> Error {
    Error::InvalidParameter {
        field,
        value: value.to_string(),
        expected,
    }
}
