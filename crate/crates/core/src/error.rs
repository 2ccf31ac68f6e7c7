use thiserror::Error;

/// Errors raised by model evaluation, the quench engine and the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model `{model}` returned a non-finite {component} at k = {k:?}")]
    NonFinite {
        model: String,
        component: &'static str,
        k: Vec<f64>,
    },

    #[error("{quantity} is not finite (overflow in the model couplings?)")]
    NonFiniteResult { quantity: &'static str },

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("the finite-size oracle requires a finite momentum grid")]
    OracleNeedsFiniteGrid,

    #[error("phase A and phase B must belong to the same symmetry class")]
    ClassMismatch,

    #[error("empty grid")]
    EmptyGrid,

    #[error("parameter grid is not uniform (step {first} vs {other} at index {index})")]
    NonUniformGrid { first: f64, other: f64, index: usize },

    #[error("degenerate least-squares fit: {0}")]
    DegenerateFit(String),

    #[error("curve too short to resolve the charging regimes: {0}")]
    Unresolvable(String),

    #[error("coupling constraint violated at delta1 = {delta1}: {inequality}")]
    CouplingConstraint { delta1: f64, inequality: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
