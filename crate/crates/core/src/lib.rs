//! Desk-scale model of a PC parallel-port data logger for slowly varying
//! temperature signals: LM35-style sensors through an amplifier and zener
//! clamp, an ADC0808 successive-approximation converter read over a
//! simulated D25 port, a sampling loop, wet/dry-bulb psychrometrics and a
//! CSV log format that round-trips exactly.

pub mod acquisition;
pub mod adc0808;
pub mod error;
pub mod logstore;
pub mod pport;
pub mod psychro;
pub mod signal_chain;
pub mod stimulus;

pub use acquisition::{
    resolve_stimulus, run_acquisition, summarize, Channel, ChannelSetup, CsvRowSink, Pacing,
    QueuedSink, RunAborted, RunConfig, RunOutput, Sample, SampleSink, Summary, Warning,
};
pub use adc0808::{AdcCode, AdcConfig, ClockConfig};
pub use error::{Error, Result};
pub use logstore::{read_csv, write_csv, PsychroRow, RunLog, RunLogWriter, RunMeta};
pub use pport::{DataPath, HandshakeMap, HandshakeTiming, PortRegisters};
pub use psychro::{PsychroConfig, PsychroReading};
pub use signal_chain::ChainConfig;
pub use stimulus::{Stimulus, StimulusSpec};
