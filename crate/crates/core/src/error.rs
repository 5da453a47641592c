//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A response coordinate is identically zero inside a weighted cluster,
    /// so the precision update has no positive root.
    #[error("degenerate response: coordinate {m} of y carries no weighted signal in component {k}")]
    DegenerateResponse { k: usize, m: usize },

    #[error("initialization failed: {0}")]
    InitializationFailed(String),

    #[error("model collection is empty")]
    EmptyCollection,

    #[error("collection spans {got} distinct dimensions, slope fit needs at least {need}")]
    InsufficientCollection { got: usize, need: usize },

    #[error("no observation has responsibility above {0}")]
    EmptyRepresentative(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
