use alloc::string::String;

/// Errors raised by the lane detection algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("image is empty")]
    EmptyImage,
    #[error("buffer of length {len} does not match a {width}x{height} raster")]
    DimensionMismatch { width: usize, height: usize, len: usize },
    #[error("intensity {value} at index {index} is outside [0, 1]")]
    IntensityOutOfRange { index: usize, value: f64 },
    #[error("{width}x{height} image is too small for block half-size {rho}")]
    ImageTooSmall { width: usize, height: usize, rho: usize },
    #[error("block centred at ({u}, {v}) with half-size {rho} leaves the image")]
    BlockOutOfBounds { u: isize, v: isize, rho: usize },
    #[error("inputs have different dimensions")]
    SizeMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least {needed} points with distinct abscissae, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("least squares system is rank deficient")]
    RankDeficient,
    #[error("road profile slope vanishes at row {row}")]
    SingularProfile { row: usize },
    #[error("road profile is not increasing at row {row}")]
    NonMonotoneProfile { row: usize },
    #[error("histogram holds no evidence")]
    NoEvidence,
    #[error("instance too large for exhaustive enumeration ({paths} paths)")]
    TooLarge { paths: u128 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: &str) -> Error {
    Error::InvalidParameter(String::from(msg))
}
