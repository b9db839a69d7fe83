use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Derived or requested ADC clock is outside the 10 kHz..=1280 kHz window.
    #[error("ADC clock {hz:.3} Hz is outside the {min:.0}..={max:.0} Hz window")]
    ClockRange { hz: f64, min: f64, max: f64 },

    /// End-of-conversion never asserted within the handshake timeout.
    #[error("device timeout: EOC not asserted after {waited_s:.6} s")]
    DeviceTimeout { waited_s: f64 },

    #[error("unsupported data path mode: {0}")]
    UnsupportedMode(&'static str),

    /// Psychrometer equation produced a non-positive vapour pressure.
    #[error("inconsistent reading: dry {dry_c} °C / wet {wet_c} °C gives vapour pressure {e_hpa:.4} hPa")]
    InconsistentReading { dry_c: f64, wet_c: f64, e_hpa: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("storage error at {}: {source}", path.display())]
    Storage {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub(crate) fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(format!(
            "{what} must be finite, got {value}"
        )))
    }
}
