use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Bad arguments: grid mismatch, integration bounds, malformed ranges.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model ingredients violate a sign or regularity requirement.
    #[error("model error: {0}")]
    Model(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    /// The inner fixed point on the environment did not settle.
    #[error("environment fixed point did not converge for b = {b} after {iterations} iterations")]
    NonConvergence { b: f64, iterations: usize },

    /// An operation was called outside the regime it is defined for.
    #[error("wrong regime: {0}")]
    WrongRegime(String),

    /// Shooting produced non-finite values.
    #[error("overflow while shooting at lambda = {re} + {im}i")]
    Overflow { re: f64, im: f64 },

    /// The function whose zeros are counted is (numerically) zero on the contour.
    #[error("function nearly vanishes on the contour (min |f| = {min_abs:e}, scale {scale:e})")]
    BoundaryZero { min_abs: f64, scale: f64 },

    /// The time integration produced non-finite values.
    #[error("simulation blew up at t = {t}")]
    BlowUp {
        t: f64,
        /// `(t, norm)` samples recorded before the failure.
        samples: Vec<(f64, f64)>,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }
}
