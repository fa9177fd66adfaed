use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Material parameters violate positivity or `alpha - gamma^2 beta > 0`.
    #[error("invalid material parameters: {0}")]
    InvalidParams(String),

    #[error(
        "epsilon = {eps:e} outside the admissible open interval ({lo:e}, {hi:e}); \
         require beta*gamma^2*mu/(4*alpha1*beta*eta^2 - alpha*mu) < epsilon < (4*alpha1*eta^2 - rho)/rho"
    )]
    EpsilonOutOfBounds { eps: f64, lo: f64, hi: f64 },

    #[error("delta = {delta:e} outside (0, 1/(eta*L)) = (0, {max:e}); the perturbed energy is no longer equivalent to the energy")]
    DeltaOutOfRange { delta: f64, max: f64 },

    /// A domain precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("eigenvalue iteration did not converge ({found} of {total} eigenvalues found)")]
    NoConvergence { found: usize, total: usize },

    #[error("non-finite state encountered at step {step} (t = {time:e})")]
    NonFinite { step: usize, time: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the physics or the requested design rather
    /// than by the environment (I/O, serialization).
    pub fn is_domain(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Json(_) | Error::Csv(_))
    }
}
