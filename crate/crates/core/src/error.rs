use thiserror::Error;

/// Errors raised by model construction, the filters and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("system is not stable: spectral radius {radius:.6e} exceeds the admissible bound {bound:.6e}")]
    Unstable { radius: f64, bound: f64 },

    #[error("eigenvalue {index} has zero modulus; the advance matrix must be nonsingular")]
    Singular { index: usize },

    #[error("{what} is ill-conditioned (condition estimate {cond:.3e}, bound {bound:.3e})")]
    IllConditioned { what: &'static str, cond: f64, bound: f64 },

    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: &'static str },

    #[error("I - c xi xi* is not positive definite (c |xi|^2 = {c_norm2:.6e})")]
    Indefinite { c_norm2: f64 },

    #[error(
        "triangular advance factorization failed at generator column {column} (step {step}): \
         {source}; try a larger forgetting factor or an exact re-initialization"
    )]
    Factorization {
        step: usize,
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("initial triangular advance deviates from the dense similarity transform by {deviation:.3e}")]
    InitMismatch { deviation: f64 },

    #[error("estimator diverged at step {step}: the gain lost definiteness or the residual is not finite")]
    Diverged { step: usize },

    #[error("generator rank {rank} exceeds the cap {cap}")]
    RankOverflow { rank: usize, cap: usize },

    #[error("trajectory too short: need {needed} samples, have {have}")]
    TrajectoryTooShort { needed: usize, have: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical algorithms themselves, as opposed to
    /// bad inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::Indefinite { .. }
                | Error::Factorization { .. }
                | Error::RankOverflow { .. }
                | Error::Diverged { .. }
                | Error::InitMismatch { .. }
                | Error::IllConditioned { .. }
        )
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::Factorization { column, source, .. } => Error::Factorization { step, column, source },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
