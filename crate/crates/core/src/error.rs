use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input tensor or batch does not have the shape an operation needs.
    #[error("shape error: {0}")]
    Shape(String),
    /// A scalar or structural parameter is outside its valid range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// The data itself cannot support the requested computation.
    #[error("data error: {0}")]
    Data(String),
    /// An algorithm was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
