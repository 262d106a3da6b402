use alloc::string::String;

use crate::poles::HyperplaneId;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("q must satisfy 0 < q < 1, got {0}")]
    InvalidQ(f64),

    #[error("non-finite value at an API boundary")]
    NonFinite,

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("depth mismatch: expected {expected}, got {got}")]
    DepthMismatch { expected: usize, got: usize },

    /// `q_index(t)` vanished (or came within the pole-proximity guard).
    #[error("singular coefficient: q_{index}(t) is zero to working precision")]
    Singular { index: usize },

    #[error("point lies within the pole-proximity guard of {0}")]
    NearPole(HyperplaneId),

    #[error("budget exhausted after {terms} terms (error estimate {err_est:e})")]
    Budget { terms: usize, err_est: f64 },

    #[error("size {n} exceeds the limit {max} for this operation")]
    TooLarge { n: usize, max: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
