//! Error types shared across the library.
//!
//! Configuration problems are reported as [`Error::Config`] carrying every
//! violation at once (the CLI maps these to exit code 2); numerical failures
//! such as a near-singular forward system or a non-contractive remainder
//! iteration map to exit code 3.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// One or more configuration violations, each tagged with its key path.
    #[error("configuration invalid:\n{}", .violations.join("\n"))]
    Config {
        /// Every violation found, `key.path: message` per entry.
        violations: Vec<String>,
    },

    /// The forward system is numerically singular: zero is (within the
    /// reciprocal-condition guard) an eigenvalue of the discrete operator.
    #[error("forward system near-singular (rcond estimate {rcond:.3e} below {threshold:.3e}); \
             zero appears to be an eigenvalue of the discrete operator")]
    EigenvalueCollision {
        /// Estimated reciprocal condition number of the block system.
        rcond: f64,
        /// Guard threshold the estimate fell below.
        threshold: f64,
    },

    /// The remainder fixed-point iteration is not a contraction at the
    /// requested scale parameter.
    #[error("remainder iteration not contractive at h = {h:.6e} (bound {bound:.3e} >= 1); \
             largest admissible h for this torus and potential bound is {h_max:.6e}")]
    NonContraction {
        /// Requested scale parameter.
        h: f64,
        /// Contraction bound `M h^2 T^2 / (4 pi^2)` that failed.
        bound: f64,
        /// Empirical largest admissible scale `2 pi / (T sqrt(M))`.
        h_max: f64,
    },

    /// The remainder iteration exceeded its iteration budget.
    #[error("remainder iteration did not reach tolerance {tol:.3e} within {max_iter} sweeps \
             (last update {last_update:.3e})")]
    NoConvergence {
        /// Absolute update tolerance requested.
        tol: f64,
        /// Iteration budget.
        max_iter: usize,
        /// Final update norm.
        last_update: f64,
    },

    /// A matrix factorization failed outright.
    #[error("factorization failed: {0}")]
    Factorization(String),

    /// Input/output failure while reading or writing artifacts.
    #[error("i/o failure at {path}: {source}")]
    Io {
        /// Path involved.
        path: String,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },

    /// Serialization / deserialization failure.
    #[error("serialization failure: {0}")]
    Serde(String),

    /// A caller violated an interface contract (sizes, ranges, invariants).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Convenience constructor for [`Error::Io`].
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Convenience constructor for [`Error::InvalidArgument`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
