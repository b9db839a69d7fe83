//! Analog front end: LM35-style sensor, gain stage, zener clamp and the
//! first-order anti-aliasing filter in front of the converter.

use std::f64::consts::PI;

use crate::error::{finite, Error, Result};

/// Top of the measurement range. The chain is aligned so that this
/// temperature lands exactly on the converter reference.
pub const FULL_SCALE_C: f64 = 50.0;

const ALIGNMENT_TOLERANCE_V: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    sensor_slope: f64,
    amp_gain: f64,
    clamp_volts: f64,
    filter_cutoff_hz: f64,
    vref: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            sensor_slope: 0.010,
            amp_gain: 10.0,
            clamp_volts: 5.0,
            filter_cutoff_hz: 0.5,
            vref: 5.0,
        }
    }
}

impl ChainConfig {
    /// Builds a chain whose gain maps [`FULL_SCALE_C`] onto `vref`.
    pub fn new(
        sensor_slope: f64,
        amp_gain: f64,
        clamp_volts: f64,
        filter_cutoff_hz: f64,
        vref: f64,
    ) -> Result<Self> {
        let cfg = Self::unaligned(sensor_slope, amp_gain, clamp_volts, filter_cutoff_hz, vref)?;
        let full_scale = sensor_slope * amp_gain * FULL_SCALE_C;
        if (full_scale - vref).abs() > ALIGNMENT_TOLERANCE_V {
            return Err(Error::invalid(format!(
                "chain not aligned: slope × gain × {FULL_SCALE_C} °C = {full_scale} V, expected vref {vref} V"
            )));
        }
        Ok(cfg)
    }

    /// Same checks as [`ChainConfig::new`] minus the full-scale alignment.
    pub fn unaligned(
        sensor_slope: f64,
        amp_gain: f64,
        clamp_volts: f64,
        filter_cutoff_hz: f64,
        vref: f64,
    ) -> Result<Self> {
        for (value, name) in [
            (sensor_slope, "sensor_slope"),
            (amp_gain, "amp_gain"),
            (clamp_volts, "clamp_volts"),
            (filter_cutoff_hz, "filter_cutoff_hz"),
            (vref, "vref"),
        ] {
            if finite(value, name)? <= 0.0 {
                return Err(Error::invalid(format!("{name} must be > 0, got {value}")));
            }
        }
        if clamp_volts > vref {
            return Err(Error::invalid(format!(
                "clamp_volts {clamp_volts} V exceeds vref {vref} V"
            )));
        }
        Ok(ChainConfig {
            sensor_slope,
            amp_gain,
            clamp_volts,
            filter_cutoff_hz,
            vref,
        })
    }

    pub fn sensor_slope(&self) -> f64 {
        self.sensor_slope
    }

    pub fn amp_gain(&self) -> f64 {
        self.amp_gain
    }

    pub fn clamp_volts(&self) -> f64 {
        self.clamp_volts
    }

    pub fn filter_cutoff_hz(&self) -> f64 {
        self.filter_cutoff_hz
    }

    pub fn vref(&self) -> f64 {
        self.vref
    }

    /// RC time constant of the anti-aliasing filter.
    pub fn filter_time_constant(&self) -> f64 {
        1.0 / (2.0 * PI * self.filter_cutoff_hz)
    }
}

/// Ideal linear sensor output in volts.
pub fn sensor_voltage(temp_c: f64, cfg: &ChainConfig) -> Result<f64> {
    Ok(cfg.sensor_slope * finite(temp_c, "temperature")?)
}

/// Gain stage followed by an ideal zener clamp to `[0, clamp_volts]`.
pub fn amplify_and_clamp(v_in: f64, cfg: &ChainConfig) -> Result<f64> {
    let amplified = cfg.amp_gain * finite(v_in, "amplifier input")?;
    Ok(amplified.clamp(0.0, cfg.clamp_volts))
}

/// Sensor plus amplifier, without the filter.
pub fn chain_output(temp_c: f64, cfg: &ChainConfig) -> Result<f64> {
    amplify_and_clamp(sensor_voltage(temp_c, cfg)?, cfg)
}

/// One step of the first-order RC low-pass.
pub fn lowpass_step(state: f64, x: f64, dt: f64, cfg: &ChainConfig) -> Result<f64> {
    if finite(dt, "dt")? <= 0.0 {
        return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
    }
    let alpha = dt / (dt + cfg.filter_time_constant());
    Ok(state + alpha * (finite(x, "filter input")? - finite(state, "filter state")?))
}

/// Caller-owned filter state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPass {
    state: f64,
}

impl LowPass {
    pub fn settled_at(value: f64) -> Self {
        LowPass { state: value }
    }

    pub fn output(&self) -> f64 {
        self.state
    }

    pub fn step(&mut self, x: f64, dt: f64, cfg: &ChainConfig) -> Result<f64> {
        self.state = lowpass_step(self.state, x, dt, cfg)?;
        Ok(self.state)
    }
}

fn check_sample_rate(f_sample: f64) -> Result<()> {
    if finite(f_sample, "sample rate")? <= 0.0 {
        return Err(Error::invalid(format!(
            "sample rate must be > 0, got {f_sample}"
        )));
    }
    Ok(())
}

/// Apparent frequency of a tone at `f_signal` after sampling at `f_sample`.
pub fn alias_frequency(f_signal: f64, f_sample: f64) -> Result<f64> {
    check_sample_rate(f_sample)?;
    if finite(f_signal, "signal frequency")? < 0.0 {
        return Err(Error::invalid(format!(
            "signal frequency must be >= 0, got {f_signal}"
        )));
    }
    Ok((f_signal - f_sample * (f_signal / f_sample).round()).abs())
}

/// True when `f_signal` lies above the Nyquist frequency of `f_sample`.
pub fn is_undersampled(f_signal: f64, f_sample: f64) -> Result<bool> {
    check_sample_rate(f_sample)?;
    Ok(f_signal > f_sample / 2.0)
}
