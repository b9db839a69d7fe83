//! Run settings assembled from defaults, an optional configuration file and
//! command-line flags, in increasing order of precedence.
//!
//! The file holds `key = value` lines under `[section]` headers. Blank lines
//! and lines starting with `#` or `;` are ignored, as is anything after a
//! whitespace-preceded `#` or `;` on a value line. Every key is checked
//! against the schema below; unknown sections, unknown keys and repeated keys
//! are errors.
//!
//! ```text
//! [run]     sample_rate_hz duration_s channels seed dry_stimulus wet_stimulus pacing queue_capacity
//! [chain]   sensor_slope amp_gain clamp_volts filter_cutoff_hz vref aligned
//! [clock]   r_ohms c_farads
//! [adc]     vref conversion_cycles unadjusted_error_lsb noise_sigma_lsb
//! [psychro] psychrometer_coeff pressure_hpa magnus_a magnus_b magnus_c
//! [port]    start_ale output_enable eoc data_path poll_divisor timeout_latencies
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use paraloq::{
    resolve_stimulus, ChainConfig, Channel, ChannelSetup, DataPath, Pacing, RunConfig, StimulusSpec,
};
use thiserror::Error;

const SECTIONS: [&str; 6] = ["run", "chain", "clock", "adc", "psychro", "port"];

#[derive(Debug, Error, PartialEq)]
#[error("{}:{line}: {msg}", path.display())]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

fn strip_inline_comment(value: &str) -> &str {
    let cut = value
        .char_indices()
        .find(|&(i, c)| (c == '#' || c == ';') && value[..i].ends_with(char::is_whitespace))
        .map_or(value.len(), |(i, _)| i);
    value[..cut].trim()
}

fn parse_entries(text: &str) -> Result<Vec<Entry>, (usize, String)> {
    let mut entries = Vec::new();
    let mut section: Option<String> = None;
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| (line, format!("malformed section header '{trimmed}'")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err((line, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| (line, format!("expected 'key = value', got '{trimmed}'")))?;
        let section = section
            .clone()
            .ok_or_else(|| (line, "key outside of any [section]".to_string()))?;
        let key = key.trim().to_string();
        if !seen.insert((section.clone(), key.clone())) {
            return Err((line, format!("key '{key}' repeated in [{section}]")));
        }
        entries.push(Entry {
            section,
            key,
            value: strip_inline_comment(value.trim()).to_string(),
            line,
        });
    }
    Ok(entries)
}

fn number<T: FromStr>(value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("'{value}' is not a valid {}", std::any::type_name::<T>()))
}

fn real(value: &str) -> Result<f64, String> {
    let v: f64 = number(value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{value}' is not finite"))
    }
}

fn boolean(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("'{other}' is not true or false")),
    }
}

/// Everything `simulate` needs before stimuli are resolved and the chain is
/// built.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub dry_stimulus: StimulusSpec,
    pub wet_stimulus: StimulusSpec,
    pub sensor_slope: f64,
    pub amp_gain: f64,
    pub clamp_volts: f64,
    pub filter_cutoff_hz: f64,
    pub chain_vref: f64,
    /// Require the chain to map the full temperature range onto vref.
    pub aligned: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let chain = ChainConfig::default();
        Settings {
            run: RunConfig::default(),
            dry_stimulus: StimulusSpec::Constant { temp_c: 20.0 },
            wet_stimulus: StimulusSpec::Constant { temp_c: 18.0 },
            sensor_slope: chain.sensor_slope(),
            amp_gain: chain.amp_gain(),
            clamp_volts: chain.clamp_volts(),
            filter_cutoff_hz: chain.filter_cutoff_hz(),
            chain_vref: chain.vref(),
            aligned: true,
        }
    }
}

impl Settings {
    /// Defaults, overridden by `path` when given.
    pub fn load(path: Option<&Path>) -> Result<Settings, ConfigError> {
        let mut settings = Settings::default();
        if let Some(path) = path {
            let err = |line, msg| ConfigError {
                path: path.to_path_buf(),
                line,
                msg,
            };
            let text = fs::read_to_string(path).map_err(|e| err(0, format!("cannot read: {e}")))?;
            let entries = parse_entries(&text).map_err(|(line, msg)| err(line, msg))?;
            for entry in &entries {
                settings.apply(entry).map_err(|msg| {
                    err(
                        entry.line,
                        format!("[{}] {}: {msg}", entry.section, entry.key),
                    )
                })?;
            }
        }
        Ok(settings)
    }

    fn apply(&mut self, entry: &Entry) -> Result<(), String> {
        let v = entry.value.as_str();
        let run = &mut self.run;
        match (entry.section.as_str(), entry.key.as_str()) {
            ("run", "sample_rate_hz") => run.sample_rate_hz = real(v)?,
            ("run", "duration_s") => run.duration_s = real(v)?,
            ("run", "channels") => {
                run.channels = v
                    .split(',')
                    .map(|c| c.parse::<Channel>().map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?
            }
            ("run", "seed") => run.seed = number(v)?,
            ("run", "dry_stimulus") => {
                self.dry_stimulus = v.parse().map_err(|e: paraloq::Error| e.to_string())?
            }
            ("run", "wet_stimulus") => {
                self.wet_stimulus = v.parse().map_err(|e: paraloq::Error| e.to_string())?
            }
            ("run", "pacing") => {
                run.pacing = match v {
                    "simulated" => Pacing::Simulated,
                    "wallclock" => Pacing::WallClock,
                    other => return Err(format!("'{other}' is not simulated or wallclock")),
                }
            }
            ("run", "queue_capacity") => run.queue_capacity = number(v)?,
            ("chain", "sensor_slope") => self.sensor_slope = real(v)?,
            ("chain", "amp_gain") => self.amp_gain = real(v)?,
            ("chain", "clamp_volts") => self.clamp_volts = real(v)?,
            ("chain", "filter_cutoff_hz") => self.filter_cutoff_hz = real(v)?,
            ("chain", "vref") => self.chain_vref = real(v)?,
            ("chain", "aligned") => self.aligned = boolean(v)?,
            ("clock", "r_ohms") => run.clock.r_ohms = real(v)?,
            ("clock", "c_farads") => run.clock.c_farads = real(v)?,
            ("adc", "vref") => run.adc.vref = real(v)?,
            ("adc", "conversion_cycles") => run.adc.conversion_cycles = number(v)?,
            ("adc", "unadjusted_error_lsb") => run.adc.unadjusted_error_lsb = real(v)?,
            ("adc", "noise_sigma_lsb") => run.adc.noise_sigma_lsb = real(v)?,
            ("psychro", "psychrometer_coeff") => run.psychro.psychrometer_coeff = real(v)?,
            ("psychro", "pressure_hpa") => run.psychro.pressure_hpa = real(v)?,
            ("psychro", "magnus_a") => run.psychro.magnus_a = real(v)?,
            ("psychro", "magnus_b") => run.psychro.magnus_b = real(v)?,
            ("psychro", "magnus_c") => run.psychro.magnus_c = real(v)?,
            ("port", "start_ale") => run.handshake.start_ale = number(v)?,
            ("port", "output_enable") => run.handshake.output_enable = number(v)?,
            ("port", "eoc") => run.handshake.eoc = number(v)?,
            ("port", "data_path") => {
                run.handshake.data_path = match v {
                    "bidirectional" => DataPath::Bidirectional,
                    "nibble" => DataPath::Nibble,
                    other => return Err(format!("'{other}' is not bidirectional or nibble")),
                }
            }
            ("port", "poll_divisor") => run.timing.poll_divisor = number(v)?,
            ("port", "timeout_latencies") => run.timing.timeout_latencies = real(v)?,
            _ => return Err("unknown key".to_string()),
        }
        Ok(())
    }

    pub fn chain(&self) -> paraloq::Result<ChainConfig> {
        let build = if self.aligned {
            ChainConfig::new
        } else {
            ChainConfig::unaligned
        };
        build(
            self.sensor_slope,
            self.amp_gain,
            self.clamp_volts,
            self.filter_cutoff_hz,
            self.chain_vref,
        )
    }

    /// Builds the chain and resolves both stimuli, reading replay files.
    pub fn into_run_config(self) -> paraloq::Result<RunConfig> {
        let chain = self.chain()?;
        let mut run = self.run;
        run.dry = ChannelSetup {
            chain,
            stimulus: resolve_stimulus(&self.dry_stimulus, Channel::Dry)?,
        };
        run.wet = ChannelSetup {
            chain,
            stimulus: resolve_stimulus(&self.wet_stimulus, Channel::Wet)?,
        };
        Ok(run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use paraloq::Stimulus;
    use std::io::Write;

    fn load_text(text: &str) -> Result<Settings, ConfigError> {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(text.as_bytes()).unwrap();
        Settings::load(Some(file.path()))
    }

    #[test]
    fn defaults_without_file() {
        let s = Settings::load(None).unwrap();
        assert_eq!(s, Settings::default());
        let run = s.into_run_config().unwrap();
        assert_eq!(run.dry, ChannelSetup::constant(20.0));
        assert_eq!(run.wet, ChannelSetup::constant(18.0));
        assert_eq!(run.sample_rate_hz, 2.0);
    }

    #[test]
    fn every_section_applies() {
        let s = load_text(
            "# comment\n\
             [run]\nsample_rate_hz = 4\nduration_s = 1.5\nchannels = wet,dry\nseed = 9\n\
             dry_stimulus = sine:2,0.1,25\nwet_stimulus = const:12\npacing = wallclock\nqueue_capacity = 8\n\
             [chain]\nfilter_cutoff_hz = 1.0\n\
             [clock]\nr_ohms = 2000\nc_farads = 1e-9\n\
             [adc]\nnoise_sigma_lsb = 0.25\nconversion_cycles = 72\n\
             ; other comment style\n\
             [psychro]\npressure_hpa = 950\n\
             [port]\neoc = 4\ntimeout_latencies = 3\n",
        )
        .unwrap();
        assert_eq!(s.run.sample_rate_hz, 4.0);
        assert_eq!(s.run.duration_s, 1.5);
        assert_eq!(s.run.channels, [Channel::Wet, Channel::Dry]);
        assert_eq!(s.run.seed, 9);
        assert_eq!(s.run.pacing, Pacing::WallClock);
        assert_eq!(s.run.queue_capacity, 8);
        assert_eq!(s.run.clock.r_ohms, 2000.0);
        assert_eq!(s.run.adc.noise_sigma_lsb, 0.25);
        assert_eq!(s.run.adc.conversion_cycles, 72);
        assert_eq!(s.run.psychro.pressure_hpa, 950.0);
        assert_eq!(s.run.handshake.eoc, 4);
        assert_eq!(s.run.timing.timeout_latencies, 3.0);
        let run = s.into_run_config().unwrap();
        assert_eq!(run.dry.chain.filter_cutoff_hz(), 1.0);
        assert!(matches!(run.dry.stimulus, Stimulus::Sine { .. }));
        assert_eq!(run.wet.stimulus, Stimulus::Constant { temp_c: 12.0 });
    }

    #[test]
    fn schema_violations_name_the_line() {
        let cases = [
            ("[run]\nrate = 2\n", 2, "unknown key"),
            ("[network]\n", 1, "unknown section"),
            ("sample_rate_hz = 2\n", 1, "outside"),
            ("[run]\nseed = 1\nseed = 2\n", 3, "repeated"),
            ("[run]\nsample_rate_hz = fast\n", 2, "not a valid"),
            ("[run]\nduration_s = inf\n", 2, "not finite"),
            ("[run]\njust text\n", 2, "key = value"),
            ("[chain]\naligned = yes\n", 2, "true or false"),
            ("[run\n", 1, "malformed"),
        ];
        for (text, line, needle) in cases {
            let err = load_text(text).unwrap_err();
            assert_eq!(err.line, line, "{text}");
            assert!(err.msg.contains(needle), "{text}: {}", err.msg);
        }
    }

    #[test]
    fn inline_comments_are_stripped() {
        let s = load_text(
            "[run]\nchannels = wet,dry   ; order\nseed = 7 # lucky\ndry_stimulus = const:21;x\n",
        );
        let err = s.unwrap_err();
        assert_eq!(err.line, 4);
        let s = load_text("[run]\nchannels = wet,dry   ; order\nseed = 7 # lucky\n").unwrap();
        assert_eq!(s.run.channels, [Channel::Wet, Channel::Dry]);
        assert_eq!(s.run.seed, 7);
    }

    #[test]
    fn readme_example_loads() {
        let readme = include_str!("../../../README.md");
        let block = readme
            .split("```ini\n")
            .nth(1)
            .and_then(|rest| rest.split("```").next())
            .unwrap();
        let s = load_text(block).unwrap();
        assert_eq!(s.run.adc.noise_sigma_lsb, 0.0);
        assert_eq!(s.run.timing.poll_divisor, 16);
        let run = s.into_run_config().unwrap();
        run.validate().unwrap();
        assert!(matches!(run.wet.stimulus, Stimulus::Sine { .. }));
    }

    #[test]
    fn missing_file_is_reported() {
        let err = Settings::load(Some(Path::new("/nonexistent/paraloq.conf"))).unwrap_err();
        assert!(err.msg.contains("cannot read"));
    }

    #[test]
    fn chain_alignment_enforced_unless_disabled() {
        let s = load_text("[chain]\namp_gain = 8\n").unwrap();
        assert!(s.chain().is_err());
        let s = load_text("[chain]\namp_gain = 8\naligned = false\n").unwrap();
        assert_eq!(s.chain().unwrap().amp_gain(), 8.0);
    }
}
