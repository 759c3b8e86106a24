use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::mesh::DiscreteField;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone)]
pub enum Error {
    /// Malformed or non-finite input.
    InvalidInput(String),
    /// A parameter lies outside its admissible range.
    OutOfRange(String),
    /// The estimate only exists for `q < p + 2`.
    UnsupportedRegime { p: f64, q: f64 },
    /// Newton's line search stalled; carries the best iterate reached.
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<DiscreteField>,
    },
    /// The energy or its derivatives stopped being finite.
    NumericalBlowup { iteration: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::OutOfRange(msg) => write!(f, "out of range: {msg}"),
            Error::UnsupportedRegime { p, q } => write!(
                f,
                "unsupported regime: estimate requires q < p + 2, got p = {p}, q = {q}"
            ),
            Error::NonConvergence {
                iterations,
                residual,
                ..
            } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::NumericalBlowup { iteration } => {
                write!(f, "non-finite energy encountered at iteration {iteration}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn out_of_range(msg: impl Into<String>) -> Error {
    Error::OutOfRange(msg.into())
}
