use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch { expected: [usize; 3], found: [usize; 3] },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conjugate symmetry violated: residual {residual:e} exceeds tolerance")]
    SymmetryViolation { residual: f64 },

    #[error("numerical divergence at time step {step}: non-finite values")]
    NumericalDivergence { step: usize },

    #[error(
        "time step too coarse at step {step}: dt * max|du/dx| = {courant:.3} (limit 1/3); increase num_time_steps"
    )]
    UnresolvedTimeStep { step: usize, courant: f64 },

    #[error("metric undefined: no patch passed the variance guard")]
    MetricUndefined,

    #[error(
        "energy increased for {consecutive} consecutive iterations at level {level}; \
         reduce step_size"
    )]
    StepSizeFailure { level: usize, consecutive: usize },

    #[error("non-finite energy at level {level}, iteration {iteration}")]
    EnergyDivergence { level: usize, iteration: usize },

    #[error("deformation folds (non-positive Jacobian determinant) at level {level}, iteration {iteration}")]
    Folding { level: usize, iteration: usize },

    #[error("NIfTI parse error at byte {offset}: {reason}")]
    NiftiParse { offset: usize, reason: String },

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
