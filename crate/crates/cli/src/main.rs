//! `paraloq`: run simulated acquisitions, compute psychrometrics, and
//! summarize or chart run logs.
//!
//! Exit codes: 0 success, 2 invalid flags or configuration, 3 device
//! timeout, 4 storage error, 5 malformed or empty input.

mod config;
mod plot;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use paraloq::psychro;
use paraloq::{
    read_csv, run_acquisition, summarize, CsvRowSink, Error, Pacing, QueuedSink, RunAborted,
    RunConfig, RunLogWriter, SampleSink, StimulusSpec,
};
use thiserror::Error as ThisError;

use config::{ConfigError, Settings};
use plot::{Column, Format};

#[derive(Debug, Parser)]
#[command(
    name = "paraloq",
    version,
    about = "Simulated parallel-port temperature and humidity logger"
)]
struct Cli {
    /// Configuration file with `key = value` lines under `[section]` headers.
    #[arg(long, global = true, env = "PARALOQ_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an acquisition on the simulated port and write a CSV log.
    Simulate(SimulateArgs),
    /// Relative humidity and dew point for one dry/wet pair.
    Compute(ComputeArgs),
    /// Chart one column of a run log.
    Plot(PlotArgs),
    /// Per-channel mean, min and max with mean humidity and dew point.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Samples per second.
    #[arg(long, value_name = "HZ", allow_negative_numbers = true, value_parser = positive)]
    rate: Option<f64>,
    /// Run length in seconds; ticks at both ends are included.
    #[arg(long, value_name = "SECONDS", allow_negative_numbers = true, value_parser = non_negative)]
    duration: Option<f64>,
    /// Constant dry-bulb temperature.
    #[arg(
        long,
        value_name = "CELSIUS",
        allow_negative_numbers = true,
        conflicts_with = "dry_stimulus"
    )]
    dry_temp: Option<f64>,
    /// Dry-bulb waveform: const:T, sine:AMP,FREQ,OFFSET or replay:PATH.
    #[arg(long, value_name = "SPEC")]
    dry_stimulus: Option<StimulusSpec>,
    /// Constant wet-bulb temperature.
    #[arg(
        long,
        value_name = "CELSIUS",
        allow_negative_numbers = true,
        conflicts_with = "wet_stimulus"
    )]
    wet_temp: Option<f64>,
    /// Wet-bulb waveform, same forms as --dry-stimulus.
    #[arg(long, value_name = "SPEC")]
    wet_stimulus: Option<StimulusSpec>,
    /// Output file, or an existing directory to place the default file name in.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Seed for converter noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Wall-clock time of the first tick (RFC 3339); defaults to now.
    #[arg(long, value_name = "TIME")]
    start: Option<DateTime<Utc>>,
    /// Run identifier used in the file name; defaults to 8 random hex digits.
    #[arg(long, value_name = "ID", value_parser = run_id)]
    run_id: Option<String>,
    /// Pace ticks against the wall clock instead of running flat out.
    #[arg(long)]
    realtime: bool,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    /// Dry-bulb temperature.
    #[arg(long, value_name = "CELSIUS", allow_negative_numbers = true)]
    dry: f64,
    /// Wet-bulb temperature.
    #[arg(long, value_name = "CELSIUS", allow_negative_numbers = true)]
    wet: f64,
    /// Station pressure.
    #[arg(long, value_name = "HPA", allow_negative_numbers = true, value_parser = positive)]
    pressure: Option<f64>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Run log to read.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Column to chart against time.
    #[arg(long, value_enum)]
    column: Column,
    #[arg(long, value_enum, default_value_t = Format::Ascii)]
    format: Format,
    /// Output file; `-` or omitted writes to standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    /// Run log to read.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
}

fn finite_number(text: &str) -> Result<f64, String> {
    let v: f64 = text
        .parse()
        .map_err(|_| format!("'{text}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite".to_string())
    }
}

fn positive(text: &str) -> Result<f64, String> {
    let v = finite_number(text)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be greater than 0".to_string())
    }
}

fn non_negative(text: &str) -> Result<f64, String> {
    let v = finite_number(text)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err("must not be negative".to_string())
    }
}

fn run_id(text: &str) -> Result<String, String> {
    let ok = !text.is_empty()
        && text
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(text.to_string())
    } else {
        Err("may only contain letters, digits, '-' and '_'".to_string())
    }
}

#[derive(Debug, ThisError)]
enum CliError {
    #[error("config {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{source}; partial log kept at {}", path.display())]
    Aborted {
        path: PathBuf,
        source: Box<RunAborted>,
    },
}

fn core_exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_)
        | Error::ClockRange { .. }
        | Error::UnsupportedMode(_)
        | Error::InconsistentReading { .. } => 2,
        Error::DeviceTimeout { .. } => 3,
        Error::Storage { .. } => 4,
        Error::Parse { .. } | Error::EmptyInput(_) => 5,
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => core_exit_code(e),
            CliError::Aborted { source, .. } => core_exit_code(&source.source),
        }
    }
}

fn storage(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Storage {
        path: path.to_path_buf(),
        source,
    }
}

fn simulate(args: SimulateArgs, config: Option<&Path>) -> Result<(), CliError> {
    let mut settings = Settings::load(config)?;
    if let Some(rate) = args.rate {
        settings.run.sample_rate_hz = rate;
    }
    if let Some(duration) = args.duration {
        settings.run.duration_s = duration;
    }
    if let Some(seed) = args.seed {
        settings.run.seed = seed;
    }
    if args.realtime {
        settings.run.pacing = Pacing::WallClock;
    }
    if let Some(spec) = args.dry_stimulus {
        settings.dry_stimulus = spec;
    } else if let Some(temp_c) = args.dry_temp {
        settings.dry_stimulus = StimulusSpec::Constant { temp_c };
    }
    if let Some(spec) = args.wet_stimulus {
        settings.wet_stimulus = spec;
    } else if let Some(temp_c) = args.wet_temp {
        settings.wet_stimulus = StimulusSpec::Constant { temp_c };
    }
    let mut cfg: RunConfig = settings.into_run_config()?;
    cfg.start = args.start.unwrap_or_else(Utc::now);
    cfg.run_id = args
        .run_id
        .unwrap_or_else(|| format!("{:08x}", rand::random::<u32>()));
    cfg.validate()?;

    let meta = cfg.meta();
    let path = match args.out {
        Some(p) if p.is_dir() => p.join(meta.file_name()),
        Some(p) => p,
        None => PathBuf::from(meta.file_name()),
    };
    let writer = RunLogWriter::create(&path, &meta)?;
    let row_sink = CsvRowSink::new(writer, cfg.psychro);

    let (result, written) = match cfg.pacing {
        Pacing::Simulated => {
            let mut sink = row_sink;
            let result = run_acquisition(&cfg, &mut [&mut sink as &mut dyn SampleSink]);
            (result, sink.finish())
        }
        Pacing::WallClock => {
            let mut queued = QueuedSink::spawn(row_sink, cfg.queue_capacity);
            let result = run_acquisition(&cfg, &mut [&mut queued as &mut dyn SampleSink]);
            let (sink, dropped) = queued.finish();
            if dropped > 0 {
                log::warn!("writer fell behind; {dropped} samples dropped");
            }
            (result, sink.finish())
        }
    };
    let out = match result {
        Ok(out) => out,
        Err(source) => {
            return Err(CliError::Aborted {
                path,
                source: Box::new(source),
            })
        }
    };
    written?;

    let mut stdout = io::stdout().lock();
    let report = format!("log: {}\n{}", path.display(), summarize(&out.log)?);
    stdout
        .write_all(report.as_bytes())
        .map_err(storage(Path::new("<stdout>")))?;
    Ok(())
}

fn compute(args: ComputeArgs, config: Option<&Path>) -> Result<(), CliError> {
    let settings = Settings::load(config)?;
    let mut cfg = settings.run.psychro;
    if let Some(p) = args.pressure {
        cfg.pressure_hpa = p;
    }
    let r = psychro::reading(args.dry, args.wet, &cfg)?;
    println!("rh_pct={:.6}, dew_point_c={:.6}", r.rh_pct, r.dew_point_c);
    Ok(())
}

fn plot_cmd(args: PlotArgs) -> Result<(), CliError> {
    let log = read_csv(&args.input)?;
    let text = plot::render(&log, args.column, args.format)?;
    match args.out {
        Some(path) if path.as_os_str() != "-" => fs::write(&path, text).map_err(storage(&path))?,
        _ => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(storage(Path::new("<stdout>")))?,
    }
    Ok(())
}

fn summarize_cmd(args: SummarizeArgs) -> Result<(), CliError> {
    let log = read_csv(&args.input)?;
    print!("{}", summarize(&log)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args, config),
        Command::Compute(args) => compute(args, config),
        Command::Plot(args) => plot_cmd(args),
        Command::Summarize(args) => summarize_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
