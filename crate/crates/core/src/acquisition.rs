//! The sampling loop: at every tick, convert each configured channel through
//! the port handshake, decode it, fan the samples out to sinks and record a
//! paired dry/wet row.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};
use thiserror::Error as ThisError;

use crate::adc0808::{clock_frequency, decode_temp, decode_volts, AdcConfig, ClockConfig};
use crate::error::{finite, Error, Result};
use crate::logstore::{
    read_csv, timestamp_at, to_millis, PsychroRow, RunLog, RunLogWriter, RunMeta,
};
use crate::pport::{
    acquire_byte, secs_to_ns, DataPath, HandshakeMap, HandshakeTiming, SimulatedBackend,
};
use crate::psychro::PsychroConfig;
use crate::signal_chain::{alias_frequency, ChainConfig};
use crate::stimulus::{AnalogInput, ReplaySeries, Stimulus, StimulusSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Dry,
    Wet,
}

impl Channel {
    /// ADC mux input the sensor is wired to.
    pub fn mux_input(self) -> u8 {
        match self {
            Channel::Dry => 0,
            Channel::Wet => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Dry => "dry",
            Channel::Wet => "wet",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dry" => Ok(Channel::Dry),
            "wet" => Ok(Channel::Wet),
            other => Err(Error::invalid(format!("unknown channel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Per-channel sequence number.
    pub seq: u64,
    pub t_s: f64,
    pub timestamp: DateTime<Utc>,
    pub channel: Channel,
    pub code: u8,
    pub volts: f64,
    pub temp_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pacing {
    /// Ticks run back to back on simulated time.
    #[default]
    Simulated,
    /// Each tick waits for its absolute wall-clock deadline.
    WallClock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSetup {
    pub chain: ChainConfig,
    pub stimulus: Stimulus,
}

impl ChannelSetup {
    pub fn constant(temp_c: f64) -> Self {
        ChannelSetup {
            chain: ChainConfig::default(),
            stimulus: Stimulus::Constant { temp_c },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// Acquisition order within a tick. Must name both channels once.
    pub channels: Vec<Channel>,
    pub clock: ClockConfig,
    pub adc: AdcConfig,
    pub dry: ChannelSetup,
    pub wet: ChannelSetup,
    pub psychro: PsychroConfig,
    pub handshake: HandshakeMap,
    pub timing: HandshakeTiming,
    pub pacing: Pacing,
    pub seed: u64,
    pub run_id: String,
    pub start: DateTime<Utc>,
    pub queue_capacity: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sample_rate_hz: 2.0,
            duration_s: 60.0,
            channels: vec![Channel::Dry, Channel::Wet],
            clock: ClockConfig::default(),
            adc: AdcConfig::default(),
            dry: ChannelSetup::constant(20.0),
            wet: ChannelSetup::constant(18.0),
            psychro: PsychroConfig::default(),
            handshake: HandshakeMap::default(),
            timing: HandshakeTiming::default(),
            pacing: Pacing::Simulated,
            seed: 0,
            run_id: "00000000".to_string(),
            start: DateTime::UNIX_EPOCH,
            queue_capacity: 1024,
        }
    }
}

impl RunConfig {
    pub fn setup(&self, channel: Channel) -> &ChannelSetup {
        match channel {
            Channel::Dry => &self.dry,
            Channel::Wet => &self.wet,
        }
    }

    /// Checks everything that can be checked before a run starts,
    /// including the derived ADC clock.
    pub fn validate(&self) -> Result<()> {
        if finite(self.sample_rate_hz, "sample_rate_hz")? <= 0.0 {
            return Err(Error::invalid(format!(
                "sample_rate_hz must be > 0, got {}",
                self.sample_rate_hz
            )));
        }
        if finite(self.duration_s, "duration_s")? < 0.0 {
            return Err(Error::invalid(format!(
                "duration_s must be >= 0, got {}",
                self.duration_s
            )));
        }
        let mut sorted = self.channels.clone();
        sorted.sort();
        if sorted != [Channel::Dry, Channel::Wet] {
            return Err(Error::invalid(
                "channels must list dry and wet exactly once each",
            ));
        }
        if self.queue_capacity == 0 {
            return Err(Error::invalid("queue_capacity must be > 0"));
        }
        self.adc.validate()?;
        self.psychro.validate()?;
        self.handshake.validate()?;
        if self.handshake.data_path == DataPath::Nibble {
            return Err(Error::UnsupportedMode("nibble"));
        }
        clock_frequency(&self.clock)?.checked()?;
        Ok(())
    }

    pub fn tick_count(&self) -> u64 {
        tick_count(self.duration_s, self.sample_rate_hz)
    }

    /// Hash over every setting that affects the recorded data.
    pub fn fingerprint(&self) -> String {
        let canonical = format!(
            "{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}",
            self.sample_rate_hz,
            self.duration_s,
            self.channels,
            self.clock,
            self.adc,
            self.dry,
            self.wet,
            self.psychro,
            self.handshake,
            self.timing,
            self.seed,
        );
        Sha256::digest(canonical.as_bytes())[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta {
            run_id: self.run_id.clone(),
            start: to_millis(self.start),
            sample_rate_hz: self.sample_rate_hz,
            channel_map: self.channels.iter().map(|&c| (c, c.mux_input())).collect(),
            config_fingerprint: self.fingerprint(),
        }
    }
}

/// Ticks in a run that includes both `t = 0` and `t = duration`.
pub fn tick_count(duration_s: f64, rate_hz: f64) -> u64 {
    let product = duration_s * rate_hz;
    let nearest = product.round();
    // Absorb representation error so that e.g. 4.35 s at 100 Hz keeps its last tick.
    let whole = if (product - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        product.floor()
    };
    whole as u64 + 1
}

/// Time of tick `k`, computed from the index so that no error accumulates.
pub fn tick_time(k: u64, rate_hz: f64) -> f64 {
    k as f64 / rate_hz
}

pub trait SampleSink {
    fn accept(&mut self, sample: &Sample);
}

impl SampleSink for Vec<Sample> {
    fn accept(&mut self, sample: &Sample) {
        self.push(sample.clone());
    }
}

struct FifoState<T> {
    items: VecDeque<T>,
    closed: bool,
    dropped: u64,
}

/// Bounded multi-thread queue that never blocks the producer: when full, the
/// oldest item is discarded and counted.
pub struct BoundedFifo<T> {
    shared: Arc<(Mutex<FifoState<T>>, Condvar)>,
    capacity: usize,
}

impl<T> Clone for BoundedFifo<T> {
    fn clone(&self) -> Self {
        BoundedFifo {
            shared: Arc::clone(&self.shared),
            capacity: self.capacity,
        }
    }
}

impl<T> BoundedFifo<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "fifo capacity must be > 0");
        BoundedFifo {
            shared: Arc::new((
                Mutex::new(FifoState {
                    items: VecDeque::with_capacity(capacity),
                    closed: false,
                    dropped: 0,
                }),
                Condvar::new(),
            )),
            capacity,
        }
    }

    /// Returns true if an old item had to be dropped.
    pub fn push(&self, item: T) -> bool {
        let (lock, ready) = &*self.shared;
        let mut state = lock.lock().unwrap_or_else(|e| e.into_inner());
        let overflow = state.items.len() >= self.capacity;
        if overflow {
            state.items.pop_front();
            state.dropped += 1;
        }
        state.items.push_back(item);
        ready.notify_one();
        overflow
    }

    /// Blocks until an item arrives; `None` once closed and drained.
    pub fn pop(&self) -> Option<T> {
        let (lock, ready) = &*self.shared;
        let mut state = lock.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            if let Some(item) = state.items.pop_front() {
                return Some(item);
            }
            if state.closed {
                return None;
            }
            state = ready.wait(state).unwrap_or_else(|e| e.into_inner());
        }
    }

    pub fn close(&self) {
        let (lock, ready) = &*self.shared;
        lock.lock().unwrap_or_else(|e| e.into_inner()).closed = true;
        ready.notify_all();
    }

    pub fn dropped(&self) -> u64 {
        self.shared
            .0
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .dropped
    }

    pub fn len(&self) -> usize {
        self.shared
            .0
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .items
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Runs a sink on its own thread behind a [`BoundedFifo`].
pub struct QueuedSink<S> {
    fifo: BoundedFifo<Sample>,
    worker: JoinHandle<S>,
}

impl<S: SampleSink + Send + 'static> QueuedSink<S> {
    pub fn spawn(mut sink: S, capacity: usize) -> Self {
        let fifo = BoundedFifo::new(capacity);
        let consumer = fifo.clone();
        let worker = std::thread::spawn(move || {
            while let Some(sample) = consumer.pop() {
                sink.accept(&sample);
            }
            sink
        });
        QueuedSink { fifo, worker }
    }

    /// Closes the queue, waits for the consumer to drain it and returns the
    /// sink with the number of samples dropped on overflow.
    pub fn finish(self) -> (S, u64) {
        self.fifo.close();
        let sink = self.worker.join().expect("sink thread panicked");
        (sink, self.fifo.dropped())
    }
}

impl<S> SampleSink for QueuedSink<S> {
    fn accept(&mut self, sample: &Sample) {
        self.fifo.push(sample.clone());
    }
}

/// Turns a textual stimulus into a waveform. Replays read the channel's
/// temperature column from a previously written run log.
pub fn resolve_stimulus(spec: &StimulusSpec, channel: Channel) -> Result<Stimulus> {
    Ok(match spec {
        StimulusSpec::Constant { temp_c } => Stimulus::Constant { temp_c: *temp_c },
        StimulusSpec::Sine {
            amplitude_c,
            freq_hz,
            offset_c,
        } => Stimulus::Sine {
            amplitude_c: *amplitude_c,
            freq_hz: *freq_hz,
            offset_c: *offset_c,
        },
        StimulusSpec::Replay(path) => {
            let log = read_csv(path)?;
            let temps = log
                .rows
                .iter()
                .map(|r| match channel {
                    Channel::Dry => r.dry_temp_c,
                    Channel::Wet => r.wet_temp_c,
                })
                .collect();
            Stimulus::Replay(ReplaySeries::new(
                log.rows.iter().map(|r| r.t_s).collect(),
                temps,
            )?)
        }
    })
}

/// Pairs each tick's dry and wet samples into a row and appends it to a
/// run log file as soon as the tick completes.
pub struct CsvRowSink {
    writer: RunLogWriter,
    psychro: PsychroConfig,
    pending: [Option<Sample>; 2],
    rows: usize,
    error: Option<Error>,
}

impl CsvRowSink {
    pub fn new(writer: RunLogWriter, psychro: PsychroConfig) -> Self {
        CsvRowSink {
            writer,
            psychro,
            pending: [None, None],
            rows: 0,
            error: None,
        }
    }

    /// Rows written, or the first write error.
    pub fn finish(self) -> Result<usize> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.rows),
        }
    }
}

impl SampleSink for CsvRowSink {
    fn accept(&mut self, sample: &Sample) {
        if self.error.is_some() {
            return;
        }
        self.pending[sample.channel as usize] = Some(sample.clone());
        let [Some(dry), Some(wet)] = &self.pending else {
            return;
        };
        if dry.t_s != wet.t_s {
            return;
        }
        let row = PsychroRow::from_codes(dry.t_s, dry.timestamp, dry.code, wet.code, &self.psychro);
        self.pending = [None, None];
        match self.writer.append(&row) {
            Ok(()) => self.rows += 1,
            Err(e) => self.error = Some(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    Undersampled {
        channel: Channel,
        signal_hz: f64,
        alias_hz: f64,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Undersampled {
                channel,
                signal_hz,
                alias_hz,
            } => write!(
                f,
                "{channel} stimulus at {signal_hz} Hz is above Nyquist; it will alias to {alias_hz} Hz"
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: RunLog,
    pub samples: Vec<Sample>,
    pub warnings: Vec<Warning>,
}

/// A run that stopped early. `partial` holds every completed tick.
#[derive(Debug, ThisError)]
#[error("acquisition aborted after {} ticks: {source}", partial.rows.len())]
pub struct RunAborted {
    pub partial: Box<RunLog>,
    #[source]
    pub source: Error,
}

fn undersampling_warnings(cfg: &RunConfig) -> Result<Vec<Warning>> {
    let mut warnings = Vec::new();
    for &channel in &cfg.channels {
        if let Some(signal_hz) = cfg.setup(channel).stimulus.max_frequency_hz() {
            if signal_hz > cfg.sample_rate_hz / 2.0 {
                let alias_hz = alias_frequency(signal_hz, cfg.sample_rate_hz)?;
                let warning = Warning::Undersampled {
                    channel,
                    signal_hz,
                    alias_hz,
                };
                log::warn!("{warning}");
                warnings.push(warning);
            }
        }
    }
    Ok(warnings)
}

/// A simulated backend with every channel's analog input attached, plus the
/// ADC clock derived from the run's RC network.
pub fn build_backend(cfg: &RunConfig) -> Result<(SimulatedBackend, f64)> {
    let clock_hz = clock_frequency(&cfg.clock)?.checked()?;
    let mut backend = SimulatedBackend::new(cfg.adc, clock_hz, cfg.handshake, cfg.seed)?;
    for &channel in &cfg.channels {
        let setup = cfg.setup(channel);
        backend.attach_input(
            channel.mux_input(),
            AnalogInput::new(setup.stimulus.clone(), setup.chain)?,
        )?;
    }
    Ok((backend, clock_hz))
}

/// Runs the acquisition on a fresh simulated backend.
pub fn run_acquisition(
    cfg: &RunConfig,
    sinks: &mut [&mut dyn SampleSink],
) -> std::result::Result<RunOutput, RunAborted> {
    let mut log = RunLog {
        meta: cfg.meta(),
        rows: Vec::new(),
    };
    let prepared = cfg
        .validate()
        .and_then(|()| undersampling_warnings(cfg))
        .and_then(|w| build_backend(cfg).map(|b| (w, b)));
    let (warnings, (backend, clock_hz)) = match prepared {
        Ok(ok) => ok,
        Err(source) => {
            return Err(RunAborted {
                partial: Box::new(log),
                source,
            })
        }
    };
    match run_with_backend(cfg, backend, clock_hz, sinks, &mut log) {
        Ok(samples) => Ok(RunOutput {
            log,
            samples,
            warnings,
        }),
        Err(source) => Err(RunAborted {
            partial: Box::new(log),
            source,
        }),
    }
}

/// Same loop against a caller-supplied backend, e.g. one with a fault injected.
pub fn run_with_backend(
    cfg: &RunConfig,
    mut backend: SimulatedBackend,
    clock_hz: f64,
    sinks: &mut [&mut dyn SampleSink],
    log: &mut RunLog,
) -> Result<Vec<Sample>> {
    let ticks = cfg.tick_count();
    let wall_start = Instant::now();
    let mut samples = Vec::with_capacity(ticks as usize * cfg.channels.len());
    let mut seq = [0u64; 2];

    for k in 0..ticks {
        let t_s = tick_time(k, cfg.sample_rate_hz);
        if cfg.pacing == Pacing::WallClock {
            let deadline = wall_start + Duration::from_secs_f64(t_s);
            if let Some(wait) = deadline.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        backend.advance_to_ns(secs_to_ns(t_s));
        let timestamp = timestamp_at(cfg.start, t_s);

        let mut codes = [0u8; 2];
        for &channel in &cfg.channels {
            let acquired = acquire_byte(
                &mut backend,
                &cfg.handshake,
                &cfg.timing,
                &cfg.adc,
                clock_hz,
                channel.mux_input(),
            );
            let code = match (acquired, backend.take_fault()) {
                (_, Some(fault)) => return Err(fault),
                (Err(e), None) => return Err(e),
                (Ok(code), None) => code.code,
            };
            let slot = channel as usize;
            codes[slot] = code;
            let sample = Sample {
                seq: seq[slot],
                t_s,
                timestamp,
                channel,
                code,
                volts: decode_volts(code, cfg.adc.vref),
                temp_c: decode_temp(code),
            };
            seq[slot] += 1;
            for sink in sinks.iter_mut() {
                sink.accept(&sample);
            }
            samples.push(sample);
        }
        log.rows.push(PsychroRow::from_codes(
            t_s,
            timestamp,
            codes[Channel::Dry as usize],
            codes[Channel::Wet as usize],
            &cfg.psychro,
        ));
    }
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl ChannelStats {
    fn over(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut n, mut sum, mut min, mut max) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            n += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        (n > 0).then(|| ChannelStats {
            mean: sum / n as f64,
            min,
            max,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: usize,
    pub dry: ChannelStats,
    pub wet: ChannelStats,
    /// Means over the rows where humidity could be computed.
    pub rh_pct: Option<ChannelStats>,
    pub dew_point_c: Option<ChannelStats>,
}

pub fn summarize(run: &RunLog) -> Result<Summary> {
    let empty = || Error::EmptyInput("run log has no rows");
    Ok(Summary {
        rows: run.rows.len(),
        dry: ChannelStats::over(run.rows.iter().map(|r| r.dry_temp_c)).ok_or_else(empty)?,
        wet: ChannelStats::over(run.rows.iter().map(|r| r.wet_temp_c)).ok_or_else(empty)?,
        rh_pct: ChannelStats::over(run.rows.iter().filter_map(|r| r.rh_pct)),
        dew_point_c: ChannelStats::over(run.rows.iter().filter_map(|r| r.dew_point_c)),
    })
}

impl fmt::Display for Summary {
    /// Four rows: dry, wet, humidity, dew point.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line =
            |f: &mut fmt::Formatter<'_>, label: &str, stats: Option<&ChannelStats>| match stats {
                Some(s) => writeln!(f, "{label} {:.6} min={:.6} max={:.6}", s.mean, s.min, s.max),
                None => writeln!(f, "{label} n/a"),
            };
        line(f, "Dry Temp", Some(&self.dry))?;
        line(f, "Wet Temp", Some(&self.wet))?;
        line(f, "Rel. Humidity", self.rh_pct.as_ref())?;
        line(f, "Dew Point", self.dew_point_c.as_ref())
    }
}
