//! Error taxonomy shared by every module.
//!
//! The categories map onto the CLI exit codes: configuration and usage
//! problems (exit 2), numerical failures such as blow-up or non-convergence
//! (exit 3), and failed report assertions (exit 4).

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Caller broke an interface contract (dimension mismatch, dt above the
    /// CFL bound, mismatched trajectories, ...).
    Usage(String),
    /// Evaluation at a point where the quantity is undefined (gradient or
    /// Hessian of the surface tension at the origin).
    Singularity(String),
    /// A query left the admissible domain (node outside the Wulff projection,
    /// backward extension past the cone time, sample outside the grid).
    Domain(String),
    /// Invalid configuration: parse errors, unresolved cross-references,
    /// out-of-range values, violated experiment preconditions.
    Config(String),
    /// Numerical failure during time integration; `step` is the first step at
    /// which a non-finite value appeared.
    Numerical { step: usize, message: String },
    /// An iterative run hit its step budget before reaching stationarity.
    /// The residual history supports post-mortem diagnosis.
    Convergence {
        message: String,
        residual_history: Vec<f64>,
    },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Usage(m) => write!(f, "usage error: {m}"),
            Error::Singularity(m) => write!(f, "singularity: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Numerical { step, message } => {
                write!(f, "numerical failure at step {step}: {message}")
            }
            Error::Convergence { message, residual_history } => write!(
                f,
                "convergence failure: {message} (last residuals: {:?})",
                &residual_history[residual_history.len().saturating_sub(4)..]
            ),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
