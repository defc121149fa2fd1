use thiserror::Error;

use crate::spd::SpdMatrix;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The computation lost too much precision or produced a degenerate value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An iterative method stopped before meeting its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The Fréchet mean iteration stopped before the gradient norm met its
    /// tolerance; carries the last iterate.
    #[error("Fréchet mean did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    MeanNoConvergence {
        last: Box<SpdMatrix>,
        gradient_norm: f64,
        iterations: usize,
    },

    /// A root bracket could not be established.
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:.6e}, f(hi) = {f_hi:.6e}")]
    NoBracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
