use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied value was rejected (non-finite input, label not in
    /// {-1,+1}, parameter out of range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Cholesky factorisation hit a non-positive pivot. `pivot` is the
    /// 1-based index of the first failing leading minor.
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// Every particle weight is zero. When raised while introducing a
    /// likelihood constraint, `constraint` holds its 1-based position in the
    /// schedule.
    #[error("particle system collapsed{}", match .constraint {
        Some(k) => format!(" at constraint {k}"),
        None => String::new(),
    })]
    ParticleCollapse { constraint: Option<usize> },

    /// EP could not recover from repeated negative cavity variances.
    #[error("EP damping floor reached after {events} negative-cavity events")]
    EpDampingFloor { events: usize },

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
