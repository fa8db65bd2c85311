use thiserror::Error;

/// Errors raised by the model and estimation layers.
#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("direction is not unit length (|n|^2 = {norm_sqr})")]
    NonUnitDirection { norm_sqr: f64 },

    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NonUnitState { norm_sqr: f64 },

    #[error("normalization {0} is not defined for this table")]
    UnsupportedNormalization(&'static str),

    #[error("operator is not a rank-1 projector: {0}")]
    NotProjector(&'static str),

    #[error("not a density operator: {reason} ({value})")]
    NotDensity { reason: &'static str, value: f64 },

    #[error("settings are not coplanar with the x-y plane (a.zz.b = {term:e})")]
    OutOfPlane { term: f64 },

    #[error("need at least {required} events, got {got}")]
    TooFewEvents { required: usize, got: usize },

    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },

    #[error("local response {value} outside [-1, 1]")]
    ResponseOutOfRange { value: f64 },

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
