use std::path::PathBuf;

/// Errors produced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size mismatch: expected {expected} entries, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero-frequency mode at wavenumber {wavenumber:?} is not masked")]
    SingularMode { wavenumber: Vec<i64> },

    #[error("negative initial spectrum {value} at wavenumber {wavenumber:?}")]
    NegativeSpectrum { wavenumber: Vec<i64>, value: f64 },

    #[error("density is not normalized: total mass {mass}")]
    Unnormalized { mass: f64 },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("degenerate bins: {0}")]
    DegenerateBins(String),

    #[error("non-finite value at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("spectrum blow-up at tau = {tau}: max {max} exceeds bound {bound}")]
    BlowUp { tau: f64, max: f64, bound: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures raised by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::BlowUp { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
