use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("step law is not symmetric: P({step}) = {prob} but P(inverse) = {inverse_prob}")]
    SymmetryViolation {
        step: String,
        prob: f64,
        inverse_prob: f64,
    },

    #[error("vertex is not valid for model {model}: {reason}")]
    InvalidVertex { model: String, reason: String },

    #[error("graph distance is not supported for {0}")]
    UnsupportedDistance(String),

    #[error("budget exceeded for {what}: requested {requested}, limit {limit}")]
    Budget {
        what: &'static str,
        requested: u64,
        limit: u64,
    },

    #[error("n = {n} is not a multiple of the period {period}")]
    Period { n: usize, period: usize },

    #[error("unreachable state at step {step}: conditioning weight is zero")]
    UnreachableState { step: usize },

    #[error("numerical instability: f_{index} = {value:e} is negative beyond tolerance")]
    NumericalInstability { index: usize, value: f64 },

    #[error("series diverges: z = {z} exceeds the radius of convergence {rho}")]
    Divergence { z: f64, rho: f64 },

    #[error("too few nonzero terms: need {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error(
        "rejection sampler accepted nothing in {attempts} attempts; \
         use importance-sampling mode (weights 2^-N, self-normalized)"
    )]
    AcceptanceStarvation { attempts: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
