use thiserror::Error;

use crate::spectral::Regime;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A weight vector is not a member of the open simplex.
    #[error("weight vector `{vector}` invalid: {reason}")]
    WeightViolation { vector: &'static str, reason: String },

    #[error("(alpha, beta) = ({alpha}, {beta}) is a forbidden pair")]
    ForbiddenPair { alpha: f64, beta: f64 },

    #[error("`{what}` has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// Operation needs at least `required` agents.
    #[error("operation requires n >= {required}, got n = {n}")]
    TooFewAgents { n: usize, required: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires the {expected:?} regime, found {found:?}")]
    WrongRegime { expected: Regime, found: Regime },

    #[error("degenerate basis scale: {0}")]
    DegenerateScale(String),

    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: usize },

    #[error("t = {t} is outside the supported range (t >= {min})")]
    RangeError { t: usize, min: usize },

    #[error("stability condition violated: max |lambda| = {max_modulus}")]
    ConditionViolated { max_modulus: f64 },

    #[error("index {index} out of range for sequence of length {len}")]
    IndexError { index: usize, len: usize },

    #[error("lag operator not invertible (kappa2 = {kappa2}, max |rho| = {max_root_modulus})")]
    NotInvertible { kappa2: f64, max_root_modulus: f64 },

    #[error("series too short: length {len}, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("invalid moment inputs: {0}")]
    InvalidMoments(String),
}
