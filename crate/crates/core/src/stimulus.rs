//! Temperature waveforms fed into the simulated sensors, and the analog
//! front end that turns them into ADC input voltages over simulated time.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{finite, Error, Result};
use crate::signal_chain::{chain_output, ChainConfig, LowPass};

// Recorded timestamps carry six decimals.
const REPLAY_TIME_SLACK_S: f64 = 1e-6;

/// Piecewise-constant series of recorded temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySeries {
    times_s: Vec<f64>,
    temps_c: Vec<f64>,
}

impl ReplaySeries {
    pub fn new(times_s: Vec<f64>, temps_c: Vec<f64>) -> Result<Self> {
        if times_s.is_empty() {
            return Err(Error::EmptyInput("replay series has no samples"));
        }
        if times_s.len() != temps_c.len() {
            return Err(Error::invalid(
                "replay times and temperatures differ in length",
            ));
        }
        if times_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("replay times must be strictly increasing"));
        }
        Ok(ReplaySeries { times_s, temps_c })
    }

    /// Value of the latest sample at or before `t_s`.
    pub fn value_at(&self, t_s: f64) -> f64 {
        let idx = self
            .times_s
            .partition_point(|&ts| ts <= t_s + REPLAY_TIME_SLACK_S);
        self.temps_c[idx.saturating_sub(1)]
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stimulus {
    Constant {
        temp_c: f64,
    },
    Sine {
        amplitude_c: f64,
        freq_hz: f64,
        offset_c: f64,
    },
    Replay(ReplaySeries),
}

impl Stimulus {
    pub fn temperature_at(&self, t_s: f64) -> f64 {
        match self {
            Stimulus::Constant { temp_c } => *temp_c,
            Stimulus::Sine {
                amplitude_c,
                freq_hz,
                offset_c,
            } => offset_c + amplitude_c * (2.0 * PI * freq_hz * t_s).sin(),
            Stimulus::Replay(series) => series.value_at(t_s),
        }
    }

    /// Highest frequency present, if the waveform is periodic.
    pub fn max_frequency_hz(&self) -> Option<f64> {
        match self {
            Stimulus::Sine { freq_hz, .. } => Some(*freq_hz),
            _ => None,
        }
    }

    /// Recorded data has already been through the front end, so replays
    /// bypass the anti-aliasing filter.
    pub fn is_filtered(&self) -> bool {
        !matches!(self, Stimulus::Replay(_))
    }
}

/// Textual stimulus description as used on the command line and in config
/// files: `const:<°C>`, `sine:<amplitude °C>,<freq Hz>,<offset °C>` or
/// `replay:<path to run CSV>`.
#[derive(Debug, Clone, PartialEq)]
pub enum StimulusSpec {
    Constant {
        temp_c: f64,
    },
    Sine {
        amplitude_c: f64,
        freq_hz: f64,
        offset_c: f64,
    },
    Replay(PathBuf),
}

impl FromStr for StimulusSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("stimulus '{s}' lacks a '<kind>:' prefix")))?;
        let number = |text: &str, what: &str| -> Result<f64> {
            let v: f64 = text
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("stimulus {what} '{text}' is not a number")))?;
            finite(v, what)
        };
        match kind.trim() {
            "const" => Ok(StimulusSpec::Constant {
                temp_c: number(args, "temperature")?,
            }),
            "sine" => {
                let parts: Vec<&str> = args.split(',').collect();
                let [amp, freq, offset] = parts[..] else {
                    return Err(Error::invalid(format!(
                        "sine stimulus needs amplitude,freq,offset; got '{args}'"
                    )));
                };
                let freq_hz = number(freq, "frequency")?;
                if freq_hz < 0.0 {
                    return Err(Error::invalid("sine frequency must be >= 0"));
                }
                Ok(StimulusSpec::Sine {
                    amplitude_c: number(amp, "amplitude")?,
                    freq_hz,
                    offset_c: number(offset, "offset")?,
                })
            }
            "replay" if !args.is_empty() => Ok(StimulusSpec::Replay(PathBuf::from(args))),
            other => Err(Error::invalid(format!("unknown stimulus kind '{other}'"))),
        }
    }
}

impl fmt::Display for StimulusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StimulusSpec::Constant { temp_c } => write!(f, "const:{temp_c}"),
            StimulusSpec::Sine {
                amplitude_c,
                freq_hz,
                offset_c,
            } => write!(f, "sine:{amplitude_c},{freq_hz},{offset_c}"),
            StimulusSpec::Replay(path) => write!(f, "replay:{}", path.display()),
        }
    }
}

/// Sensor, amplifier and filter for one mux input, integrated lazily up to
/// whatever instant the converter samples it.
#[derive(Debug, Clone)]
pub struct AnalogInput {
    stimulus: Stimulus,
    chain: ChainConfig,
    filter: Option<LowPass>,
    t_s: f64,
    max_step_s: f64,
}

impl AnalogInput {
    pub fn new(stimulus: Stimulus, chain: ChainConfig) -> Result<Self> {
        let filter = if stimulus.is_filtered() {
            Some(LowPass::settled_at(chain_output(
                stimulus.temperature_at(0.0),
                &chain,
            )?))
        } else {
            None
        };
        let max_step_s = (chain.filter_time_constant() / 20.0).min(1e-3);
        Ok(AnalogInput {
            stimulus,
            chain,
            filter,
            t_s: 0.0,
            max_step_s,
        })
    }

    pub fn stimulus(&self) -> &Stimulus {
        &self.stimulus
    }

    /// Voltage at the ADC pin at `t_s`. Time must not go backwards.
    pub fn voltage_at(&mut self, t_s: f64) -> Result<f64> {
        if t_s < self.t_s {
            return Err(Error::invalid(format!(
                "analog input sampled at {t_s} s after {} s",
                self.t_s
            )));
        }
        let Some(filter) = self.filter.as_mut() else {
            self.t_s = t_s;
            return chain_output(self.stimulus.temperature_at(t_s), &self.chain);
        };
        let span = t_s - self.t_s;
        if span > 0.0 {
            let steps = (span / self.max_step_s).ceil().max(1.0) as u64;
            let dt = span / steps as f64;
            for i in 1..=steps {
                let t = self.t_s + dt * i as f64;
                let x = chain_output(self.stimulus.temperature_at(t), &self.chain)?;
                filter.step(x, dt, &self.chain)?;
            }
            self.t_s = t_s;
        }
        Ok(filter.output())
    }
}
