use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::LinalgError;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("generalized Lyapunov operator is singular (pivot {pivot} is {value:.3e})")]
    SingularOperator { pivot: usize, value: f64 },
    #[error("Lyapunov residual {residual:.3e} exceeds {bound:.3e}")]
    LyapunovResidual { residual: f64, bound: f64 },
    #[error("system is not mean-square stable")]
    NotStable,
    #[error("{which} Gramian is not positive definite (smallest eigenvalue {min_eig:.3e})")]
    SingularGramian { which: &'static str, min_eig: f64 },
    #[error("{what} is not positive definite")]
    NotPd { what: &'static str },
    #[error("smallest singular value {sigma_min:.3e} is negligible against {sigma_max:.3e}")]
    NearZeroSigma { sigma_min: f64, sigma_max: f64 },
    #[error("no strictly feasible starting point for the LMI")]
    InfeasibleStart,
    #[error("line search stalled at barrier parameter {t:.3e}")]
    LineSearchStall { t: f64 },
    #[error("{0} exceeded its iteration limit")]
    MaxIterations(&'static str),
    #[error("objective tr(PQ) is not bounded below because Q is singular")]
    ObjectiveNotCoercive,
    #[error("could not bracket the {0}")]
    BracketFailure(&'static str),
    #[error("reduced system lost mean-square stability")]
    StabilityLost,
    #[error("log-linear fit is inconclusive (slope {slope:.3e}, R² {r_squared:.3})")]
    InconclusiveFit { slope: f64, r_squared: f64 },
    #[error("time step {dt:.3e} is too large: halving it changes the result")]
    StepInstability { dt: f64 },
    #[error("all {paths} simulated paths blew up")]
    SimulationBlowUp { paths: usize },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
