use thiserror::Error;

/// Errors produced by the solvers and input validation.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad input: violated precondition, mismatched grids, malformed data.
    #[error("validation error: {0}")]
    Validation(String),

    /// A solver failed to reach its tolerance.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Positivity could not be maintained by step rejection.
    #[error("negative {field} at node {node} (value {value:.3e}) with dt at its minimum {dt:.3e}")]
    Positivity {
        field: &'static str,
        node: usize,
        value: f64,
        dt: f64,
    },

    /// A theorem hypothesis required by a limit formula or diagnostic fails.
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    /// The mesh is too coarse for the requested profile.
    #[error("under-resolved profile: steepest transition spans {cells:.1} cells (need {required}); try n_cells >= {suggested}")]
    UnderResolved {
        cells: f64,
        required: usize,
        suggested: usize,
    },

    #[error("singular linear system at pivot {0}")]
    Singular(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for input problems, false for solver failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Hypothesis(_) | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
