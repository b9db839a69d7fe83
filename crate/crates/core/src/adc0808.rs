//! ADC0808 model: RC clock generator, 8-bit successive approximation,
//! conversion timing and the code-to-temperature decode.
//!
//! Quantizer convention: transitions sit at `k · vref / 256` (floor, top code
//! clamped to 255) while decoding spans `vref / 255` per code, so code 255
//! decodes to exactly full scale.

use std::io::{self, Write};

use crate::error::{finite, Error, Result};
use crate::signal_chain::FULL_SCALE_C;

pub const BITS: u32 = 8;
pub const LEVELS: u32 = 1 << BITS;
pub const MAX_CODE: u8 = u8::MAX;
pub const CHANNELS: u8 = 8;

pub const CLOCK_MIN_HZ: f64 = 10e3;
pub const CLOCK_MAX_HZ: f64 = 1_280e3;

/// Constant of the 7414 Schmitt-trigger RC oscillator, `f = 1 / (1.1 R C)`.
pub const OSCILLATOR_K: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockConfig {
    pub r_ohms: f64,
    pub c_farads: f64,
}

impl Default for ClockConfig {
    /// 640 kHz with a 1 nF timing capacitor.
    fn default() -> Self {
        ClockConfig::for_frequency(640e3, 1e-9).expect("valid default clock")
    }
}

impl ClockConfig {
    /// Solves the oscillator equation for R given a target frequency and C.
    pub fn for_frequency(hz: f64, c_farads: f64) -> Result<Self> {
        if finite(hz, "frequency")? <= 0.0 || finite(c_farads, "capacitance")? <= 0.0 {
            return Err(Error::invalid(format!(
                "frequency and capacitance must be > 0, got {hz} Hz / {c_farads} F"
            )));
        }
        Ok(ClockConfig {
            r_ohms: 1.0 / (OSCILLATOR_K * hz * c_farads),
            c_farads,
        })
    }

    pub fn rc_seconds(&self) -> f64 {
        self.r_ohms * self.c_farads
    }
}

/// Oscillator output frequency. Being outside the converter's clock window is
/// reported through [`ClockFrequency::checked`], not as a failure here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockFrequency {
    pub hz: f64,
}

impl ClockFrequency {
    pub fn in_window(&self) -> bool {
        (CLOCK_MIN_HZ..=CLOCK_MAX_HZ).contains(&self.hz)
    }

    pub fn checked(self) -> Result<f64> {
        check_clock(self.hz)?;
        Ok(self.hz)
    }
}

pub fn clock_frequency(cfg: &ClockConfig) -> Result<ClockFrequency> {
    let r = finite(cfg.r_ohms, "R")?;
    let c = finite(cfg.c_farads, "C")?;
    if r <= 0.0 || c <= 0.0 {
        return Err(Error::invalid(format!(
            "R and C must be > 0, got {r} Ω / {c} F"
        )));
    }
    let hz = 1.0 / (OSCILLATOR_K * r * c);
    let freq = ClockFrequency { hz };
    if !freq.in_window() {
        log::warn!("ADC clock {hz:.1} Hz outside {CLOCK_MIN_HZ}..={CLOCK_MAX_HZ} Hz");
    }
    Ok(freq)
}

pub fn check_clock(hz: f64) -> Result<()> {
    if (CLOCK_MIN_HZ..=CLOCK_MAX_HZ).contains(&hz) {
        Ok(())
    } else {
        Err(Error::ClockRange {
            hz,
            min: CLOCK_MIN_HZ,
            max: CLOCK_MAX_HZ,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcConfig {
    pub vref: f64,
    pub conversion_cycles: u32,
    /// Total unadjusted error bound (0.5 for the 0808, 1.0 for the 0809).
    pub unadjusted_error_lsb: f64,
    /// Standard deviation of additive input noise. Zero keeps runs deterministic.
    pub noise_sigma_lsb: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        AdcConfig {
            vref: 5.0,
            // 100 µs at 640 kHz.
            conversion_cycles: 64,
            unadjusted_error_lsb: 0.5,
            noise_sigma_lsb: 0.0,
        }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<()> {
        if finite(self.vref, "vref")? <= 0.0 {
            return Err(Error::invalid(format!(
                "vref must be > 0, got {}",
                self.vref
            )));
        }
        if self.conversion_cycles == 0 {
            return Err(Error::invalid("conversion_cycles must be > 0"));
        }
        if finite(self.unadjusted_error_lsb, "unadjusted_error_lsb")? < 0.0 {
            return Err(Error::invalid("unadjusted_error_lsb must be >= 0"));
        }
        if finite(self.noise_sigma_lsb, "noise_sigma_lsb")? < 0.0 {
            return Err(Error::invalid("noise_sigma_lsb must be >= 0"));
        }
        Ok(())
    }

    /// Width of one quantizer step, `vref / 256`.
    pub fn lsb_volts(&self) -> f64 {
        self.vref / LEVELS as f64
    }

    /// Input voltage at which the output first reaches `code`.
    pub fn transition_volts(&self, code: u8) -> f64 {
        code as f64 * self.vref / LEVELS as f64
    }

    pub fn error_bound_volts(&self) -> f64 {
        self.unadjusted_error_lsb * self.lsb_volts()
    }

    pub fn latency_s(&self, clock_hz: f64) -> f64 {
        self.conversion_cycles as f64 / clock_hz
    }
}

/// Result of one conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcCode {
    pub code: u8,
    /// Comparator decisions, MSB first.
    pub sar_trace: [bool; BITS as usize],
    pub latency_s: f64,
    pub channel: u8,
}

impl AdcCode {
    /// The binary number spelled by `sar_trace`.
    pub fn trace_value(&self) -> u8 {
        self.sar_trace
            .iter()
            .fold(0u8, |acc, &bit| (acc << 1) | bit as u8)
    }

    /// Writes one line per SAR step: step index, trial code, threshold volts, decision.
    pub fn write_trace<W: Write>(&self, cfg: &AdcConfig, mut out: W) -> io::Result<()> {
        let mut kept = 0u8;
        for (step, &decision) in self.sar_trace.iter().enumerate() {
            let trial = kept | (0x80 >> step);
            writeln!(
                out,
                "{step} {trial} {:.6} {}",
                cfg.transition_volts(trial),
                decision as u8
            )?;
            if decision {
                kept = trial;
            }
        }
        Ok(())
    }
}

// Comparator domain shared by both conversion paths: input in LSB units.
fn scaled_input(v_in: f64, cfg: &AdcConfig) -> f64 {
    v_in * LEVELS as f64 / cfg.vref
}

/// Ideal transfer function: `clamp(floor(v · 256 / vref), 0, 255)`.
pub fn quantize(v_in: f64, cfg: &AdcConfig) -> Result<u8> {
    let scaled = scaled_input(finite(v_in, "ADC input")?, cfg);
    Ok(scaled.floor().clamp(0.0, MAX_CODE as f64) as u8)
}

/// Runs the 8-step successive approximation with the input held constant.
pub fn sar_convert(v_in: f64, channel: u8, clock_hz: f64, cfg: &AdcConfig) -> Result<AdcCode> {
    cfg.validate()?;
    check_clock(finite(clock_hz, "clock")?)?;
    if channel >= CHANNELS {
        return Err(Error::invalid(format!(
            "channel {channel} out of range 0..{CHANNELS}"
        )));
    }
    let held = scaled_input(finite(v_in, "ADC input")?, cfg);

    let mut code = 0u8;
    let mut sar_trace = [false; BITS as usize];
    for (step, decision) in sar_trace.iter_mut().enumerate() {
        let trial = code | (0x80 >> step);
        if held >= trial as f64 {
            code = trial;
            *decision = true;
        }
    }

    Ok(AdcCode {
        code,
        sar_trace,
        latency_s: cfg.latency_s(clock_hz),
        channel,
    })
}

/// Temperature for a code under the aligned chain: `code · 50 / 255` °C.
pub fn decode_temp(code: u8) -> f64 {
    code as f64 * FULL_SCALE_C / MAX_CODE as f64
}

/// [`decode_temp`] for codes arriving as wider integers (e.g. parsed from text).
pub fn decode_temp_checked(code: i64) -> Result<f64> {
    u8::try_from(code)
        .map(decode_temp)
        .map_err(|_| Error::invalid(format!("ADC code {code} out of range 0..=255")))
}

/// Voltage for a code on the `vref / 255` decode span.
pub fn decode_volts(code: u8, vref: f64) -> f64 {
    code as f64 * vref / MAX_CODE as f64
}
