use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty swarm")]
    EmptySwarm,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },

    #[error("eigen-solver did not converge (residual norm {residual:e})")]
    EigenNonConvergence { residual: f64 },

    #[error("quadrature did not reach tolerance {tolerance:e} (achieved {achieved:e})")]
    QuadratureTolerance { tolerance: f64, achieved: f64 },

    #[error("role mismatch: agent {agent} is not a leader")]
    RoleMismatch { agent: usize },

    #[error("interpolation parameter {0} outside [0, 1]")]
    InterpolationRange(f64),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed trajectory record: {0}")]
    Trajectory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
