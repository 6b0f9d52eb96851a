use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("field contains a non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("target node is unreachable from the source set")]
    Disconnected,

    #[error("domain rejected: {0}")]
    InvalidDomain(String),

    #[error("explicit step dt = {dt:e} exceeds the stable bound {bound:e}")]
    UnstableStep { dt: f64, bound: f64 },

    #[error("newton iteration did not converge at t = {t}: residual {residual:e} after {iterations} iterations")]
    NewtonFailure { t: f64, residual: f64, iterations: usize },

    #[error("non-finite value produced by step at t = {t}")]
    StepBlowUp { t: f64 },

    #[error("linear solve failed: singular block")]
    SingularSystem,

    #[error("patches {first} and {second} have overlapping supports")]
    PatchOverlap { first: usize, second: usize },

    #[error("observer failed at t = {t}: {message}")]
    Observer { t: f64, message: String },

    #[error("snapshot parse error on line {line}: {message}")]
    Snapshot { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True when the error came out of the time integrator rather than input handling.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::UnstableStep { .. } | Error::NewtonFailure { .. } | Error::StepBlowUp { .. } | Error::SingularSystem
        )
    }
}
