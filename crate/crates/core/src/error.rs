use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("jet shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("jet base points differ: ({0}, {1}) vs ({2}, {3})")]
    BaseMismatch(f64, f64, f64, f64),

    #[error("jet shape too small: {0}")]
    ShapeTooSmall(String),

    #[error("division by near-zero jet (constant term {value:e})")]
    DivisionByZero { value: f64 },

    #[error("{op} outside its domain at {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("outer function needs {needed} derivatives, got {got}")]
    InsufficientDerivatives { needed: usize, got: usize },

    #[error("derivative order ({i}, {k}) out of range for shape ({r_order}, {s_order})")]
    OrderOutOfRange { i: usize, k: usize, r_order: usize, s_order: usize },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("inadmissible point (r = {r}, s = {s}): {reason}")]
    Inadmissible { r: f64, s: f64, reason: String },

    #[error("singular metric: {what} = {value:e}")]
    SingularMetric { what: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("finite-difference stencil leaves the domain at (r = {r}, s = {s})")]
    StencilOutsideDomain { r: f64, s: f64 },

    #[error("tensor shape mismatch: {0} vs {1} entries")]
    TensorShape(usize, usize),
}

impl Error {
    /// True for failures caused by where a model was evaluated rather than how it was written.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::DivisionByZero { .. }
                | Error::Domain { .. }
                | Error::Inadmissible { .. }
                | Error::SingularMetric { .. }
                | Error::StencilOutsideDomain { .. }
                | Error::Quadrature { .. }
        )
    }
}
