use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("radius {r} outside the domain (0, {r_max}]")]
    Domain { r: f64, r_max: f64 },

    #[error("warp function vanishes at r* = {r_star:.10} (conjugate point)")]
    ConjugatePoint { r_star: f64 },

    #[error("integration failed at r = {r}: {reason}")]
    Integration { r: f64, reason: String },

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:e})")]
    Quadrature { a: f64, b: f64, estimate: f64 },

    #[error("overflow at r = {r}")]
    Overflow { r: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown profile `{0}`")]
    UnknownProfile(String),

    #[error("non-finite input at index {0}")]
    NonFinite(usize),

    #[error("curvature is not negative on the fit window (K({r}) = {k})")]
    NotClassifiable { r: f64, k: f64 },

    #[error("{0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
