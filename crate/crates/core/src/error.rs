use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lattice sum diverges: need r > d, got d={d}, r={r}")]
    DivergentSum { d: usize, r: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("coefficient a_j^n at j=({j}), n=({n}) has modulus {modulus:e}, above the envelope bound {bound:e}")]
    EnvelopeViolation { j: String, n: String, modulus: f64, bound: f64 },

    #[error("window of radius {available} is too small, need {required}")]
    WindowTooSmall { required: f64, available: f64 },

    #[error("agreement hypothesis violated at i=({i}), j=({j}): |difference| = {difference:e} is not below {tolerance:e}")]
    HypothesisViolated { i: String, j: String, difference: f64, tolerance: f64 },

    #[error("support set is empty")]
    EmptySupport,

    #[error("operation requires a self-adjoint coefficient field")]
    NotSelfAdjoint,

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
}

impl Error {
    /// Violations of a mathematical hypothesis rather than of argument shape.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(self, Error::HypothesisViolated { .. } | Error::EnvelopeViolation { .. })
    }
}
