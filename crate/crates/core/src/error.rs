use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {wavelength_um} um is outside the Sellmeier validity window [{min_um}, {max_um}] um")]
    OutsideWindow {
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("invalid wavelength pair: signal {signal_um} um must be longer than pump {pump_um} um")]
    InvalidPair { pump_um: f64, signal_um: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no root of {what} in [{lo_um}, {hi_um}] um{detail}")]
    NoRoot {
        what: String,
        lo_um: f64,
        hi_um: f64,
        detail: String,
    },

    #[error("undefined value: {0} is zero")]
    Undefined(String),

    #[error("no peak: {0}")]
    NoPeak(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
