use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The cyclic frequency does not fall on the FFT bin grid of the block.
    #[error("cyclic frequency {alpha} Hz is not a multiple of the bin spacing {bin} Hz")]
    OffGrid { alpha: f64, bin: f64 },

    #[error("frequency band selects no bins")]
    EmptyBand,

    #[error("matrix is singular or defective: {0}")]
    Singular(String),

    /// PSP direction is unobservable (DGD near 0 or half a symbol).
    #[error("PSP indeterminate: |sin(2*pi*alpha*dgd)| proxy {0:.3e} below threshold")]
    IndeterminatePsp(f64),

    #[error("equalizer diverged at symbol {symbol}: output power {power:.3e}")]
    EqualizerDiverged { symbol: usize, power: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
