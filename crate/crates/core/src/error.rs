use crate::grid::Point;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("non-finite sample {value} at cell {cell} (center {center})")]
    NonFiniteSample {
        cell: usize,
        center: Point,
        value: f64,
    },

    #[error("non-finite intermediate in {what} at x = {center}, r = {radius}")]
    NonFinite {
        what: &'static str,
        center: Point,
        radius: f64,
    },

    #[error("non-finite {what} at x = {center}, r = {radius}, t = {t}")]
    NonFiniteCondition {
        what: &'static str,
        center: Point,
        radius: f64,
        t: f64,
    },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
