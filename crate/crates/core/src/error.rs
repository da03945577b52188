use thiserror::Error;

/// Errors produced by the numerical routines.
///
/// Variants are grouped by the caller's likely response: a bad shape or
/// configuration is a usage problem, a numerical failure depends on the data,
/// and a layout failure means the template image did not contain the
/// characters the caller asked for.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("layout error: {0}")]
    Layout(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::Error::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
