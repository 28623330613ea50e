use thiserror::Error;

/// Errors produced by the calibration toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver ran out of iterations.
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    /// An operation that needs at least one element got none.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// The requested guarantee cannot be met with the available data.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A group that was expected during grouped calibration has no records.
    #[error("group `{0}` has no calibration records")]
    MissingGroup(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Checks that `x` lies strictly inside (0, 1).
pub(crate) fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {x}")))
    }
}
