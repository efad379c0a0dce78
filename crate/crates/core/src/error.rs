use thiserror::Error;

use crate::geometry::GeometryError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid scheme: {0}")]
    Scheme(String),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("singular configuration: bodies {0} and {1} coincide")]
    Singular(usize, usize),
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },
    #[error("step mode requires an analytic force-gradient term")]
    MissingFgTerm,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn scheme(msg: impl Into<String>) -> Self {
        Error::Scheme(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
