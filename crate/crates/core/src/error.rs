use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while evaluating or solving a problem.
///
/// Numeric payloads are carried as `f64` so the error type stays independent
/// of the scalar type the solver runs in.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("evaluating {name}: {source}")]
    Parameter {
        name: String,
        #[source]
        source: EvalError,
    },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("invalid problem: {0}")]
    Invalid(String),

    #[error("decision {x:?} lies outside the box")]
    OutsideBox { x: Vec<f64> },

    #[error("ambiguity set empty at x = {x:?}: {detail}")]
    AmbiguityEmpty { x: Vec<f64>, detail: String },

    #[error("complete recourse violated at x = {x:?}, xi = {xi:?}: second-stage problem infeasible")]
    RecourseInfeasible { x: Vec<f64>, xi: Vec<f64> },

    #[error("second-stage problem unbounded at x = {x:?}, xi = {xi:?}")]
    RecourseUnbounded { x: Vec<f64>, xi: Vec<f64> },

    #[error("Slater condition fails ({family}): {detail}; strong duality requires a strictly feasible distribution")]
    SlaterViolated { family: String, detail: String },

    #[error("{what}: tolerance not reached after {iterations} iterations (lower {lower:e}, upper {upper:e})")]
    Tolerance {
        what: String,
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("{what}: bracket [{lo:e}, {hi:e}] exhausted, minimizer at the boundary")]
    BracketExhausted { what: String, lo: f64, hi: f64 },

    #[error("cutting-surface loop did not terminate within {iterations} iterations (last violation {violation:e})")]
    NonTermination { iterations: usize, violation: f64 },

    #[error("{family} is not supported by {operation}")]
    Unsupported { family: String, operation: String },
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, value: f64, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            value,
            reason: reason.into(),
        }
    }
}
