use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{what} must not be empty")]
    EmptyInput { what: &'static str },

    #[error("non-finite coordinate at point {index}")]
    NonFiniteCoordinate { index: usize },

    #[error(
        "diameter bound violated: points {i} and {j} are {distance} apart, bound is {bound}"
    )]
    DiameterExceeded {
        i: usize,
        j: usize,
        distance: f64,
        bound: f64,
    },

    #[error("parameter {name} = {value} violates: {constraint}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("weighted data has no entry with positive weight")]
    ZeroWeightSupport,

    #[error(
        "budget split infeasible: averaging stage would need eps_G = {eps_g} > 1/3"
    )]
    InfeasibleBudget { eps_g: f64 },

    #[error(
        "grid key for d' = {dprime} at {bits} bits per axis exceeds the supported 192-bit key"
    )]
    GridKeyOverflow { dprime: usize, bits: u32 },
}
