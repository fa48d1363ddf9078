use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a kernel or beta system.
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    /// A polygamma argument hit a non-positive integer.
    #[error("pole of {what} at x = {x}")]
    Pole { what: &'static str, x: f64 },

    /// Adaptive quadrature ran out of panels before meeting its tolerance.
    #[error("{what} did not converge: {detail}")]
    Convergence { what: &'static str, detail: String },

    /// Newton iteration stopped without meeting its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterate: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    /// A malformed problem description.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    /// True for errors that mean "the state left the admissible region",
    /// as opposed to a malformed request.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain { .. } | Error::Pole { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
