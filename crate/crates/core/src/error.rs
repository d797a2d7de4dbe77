use thiserror::Error;

/// Errors raised by model construction, solvers and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates a documented bound.
    #[error("invalid parameter `{name}`: {reason}")]
    Validation { name: String, reason: String },

    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error in {what}: {reason}")]
    Domain { what: &'static str, reason: String },

    /// The volatility matrix fails the uniform ellipticity check.
    #[error("volatility matrix is not uniformly elliptic at t = {t}: smallest eigenvalue {min_eigenvalue:e} below {bound:e}")]
    Ellipticity { t: f64, min_eigenvalue: f64, bound: f64 },

    /// A closed-form Riccati solution lost positivity.
    #[error("solvability condition violated at t = {t}: {reason}")]
    Solvability { t: f64, reason: String },

    /// The spatial derivative of the PDE solution vanished.
    #[error("degenerate marginal: |theta_x| below threshold at t = {t}, x = {x}")]
    Degeneracy { t: f64, x: f64 },

    /// An iterative solver did not reach its tolerance.
    #[error("{solver} failed to converge at t = {t}: residual {residual:e} after {iterations} iterations")]
    Convergence {
        solver: &'static str,
        t: f64,
        residual: f64,
        iterations: usize,
    },

    /// A query fell outside a precomputed grid.
    #[error("query ({t}, {x}) outside the computed grid")]
    Extrapolation { t: f64, x: f64 },

    /// Every simulated path was excluded.
    #[error("all {flagged} paths were flagged as inadmissible")]
    NoAdmissiblePaths { flagged: usize },

    /// Reading or writing output failed.
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub fn validation(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn domain(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            what,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Ellipticity { .. } | Error::Domain { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
