use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// The CLI maps `Validation`/`Invariant`/`Io`/`Parse` to exit status 2 and the
/// numerical variants to exit status 3.
#[derive(Debug, Error)]
pub enum MltError {
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("matrix exponential overflow (1-norm {norm:.3e})")]
    ExpmOverflow { norm: f64 },

    #[error("unstable dynamics: trajectory norm exceeded {guard:.1e} (spectral abscissa {abscissa:.6})")]
    Unstable { abscissa: f64, guard: f64 },

    #[error("operator is not Hurwitz (spectral abscissa {abscissa:.6})")]
    NotHurwitz { abscissa: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular or rank-deficient system: {0}")]
    Singular(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("degenerate sample in {scope}: {reason}")]
    Degenerate { scope: String, reason: String },

    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MltError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MltError::ExpmOverflow { .. }
                | MltError::Unstable { .. }
                | MltError::NotHurwitz { .. }
                | MltError::NoConvergence { .. }
                | MltError::Singular(_)
                | MltError::NonFinite(_)
                | MltError::Degenerate { .. }
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        MltError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, MltError>;
