use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A link record violates a model invariant.
    #[error("link `{link}`: {reason}")]
    InvalidLink { link: String, reason: String },

    /// The model document is malformed or violates the chain schema.
    #[error("model document: {0}")]
    Document(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory: {0}")]
    Trajectory(String),

    /// The mass-inertia matrix lost positive definiteness.
    #[error("metric is not positive definite at the queried configuration")]
    NotPositiveDefinite,

    #[error("tangent vector has zero Riemannian norm")]
    ZeroVector,

    #[error("non-finite state during integration at step {step}")]
    NonFinite { step: usize },

    #[error("logarithmic map did not converge after {iterations} iterations (best residual {residual:.3e} rad)")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("tracking diverged at sample {sample} (position error {position:.3} m, orientation error {orientation:.3} rad)")]
    Diverged {
        sample: usize,
        position: f64,
        orientation: f64,
    },

    /// Failure while planning one synergy of a longer motion.
    #[error("synergy {segment}: {source}")]
    Segment {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_segment(self, segment: usize) -> Self {
        Error::Segment {
            segment,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite
            | Error::ZeroVector
            | Error::NonFinite { .. }
            | Error::NoConvergence { .. }
            | Error::Diverged { .. } => true,
            Error::Segment { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
