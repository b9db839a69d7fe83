//! Run logs as spreadsheet-friendly CSV.
//!
//! Layout (UTF-8, CRLF line endings, no quoting):
//!
//! ```text
//! # run_id=3f9a0c12
//! # start=2026-10-16T12:00:00.000Z
//! # sample_rate_hz=2
//! # channels=dry:0,wet:1
//! # config_fingerprint=9c0e5d7b1a2f4e68
//! t_s,timestamp,dry_code,dry_temp_c,wet_code,wet_temp_c,rh_pct,dew_point_c
//! 0.000000,2026-10-16T12:00:00.000Z,102,20.000000,92,18.039216,82.872516,16.998432
//! ```
//!
//! Floats carry six decimals. `rh_pct` and `dew_point_c` are empty when the
//! reading pair is physically inconsistent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, SecondsFormat, Utc};

use crate::acquisition::Channel;
use crate::adc0808::decode_temp;
use crate::error::{Error, Result};
use crate::psychro::{dew_point, relative_humidity, PsychroConfig};

pub const HEADER: &str = "t_s,timestamp,dry_code,dry_temp_c,wet_code,wet_temp_c,rh_pct,dew_point_c";
pub const COLUMNS: usize = 8;
const EOL: &str = "\r\n";
const TEMP_MATCH_TOLERANCE: f64 = 1e-6;

/// Rounds to the six decimals stored on disk, so in-memory values equal
/// what a read-back produces.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Truncates to the millisecond precision of stored timestamps.
pub fn to_millis(ts: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(ts.timestamp_millis()).expect("timestamp in range")
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Absolute time of an offset from run start, at millisecond precision.
pub fn timestamp_at(start: DateTime<Utc>, t_s: f64) -> DateTime<Utc> {
    to_millis(start) + Duration::milliseconds((t_s * 1e3).round() as i64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub run_id: String,
    pub start: DateTime<Utc>,
    pub sample_rate_hz: f64,
    /// Logical channel to ADC mux input.
    pub channel_map: Vec<(Channel, u8)>,
    pub config_fingerprint: String,
}

impl RunMeta {
    /// `run_<ISO-8601 basic>_<id>.csv`
    pub fn file_name(&self) -> String {
        format!(
            "run_{}_{}.csv",
            self.start.format("%Y%m%dT%H%M%SZ"),
            self.run_id
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsychroRow {
    pub t_s: f64,
    pub timestamp: DateTime<Utc>,
    pub dry_code: u8,
    pub dry_temp_c: f64,
    pub wet_code: u8,
    pub wet_temp_c: f64,
    pub rh_pct: Option<f64>,
    pub dew_point_c: Option<f64>,
}

impl PsychroRow {
    /// Decodes both codes and derives humidity and dew point from the
    /// decoded temperatures.
    pub fn from_codes(
        t_s: f64,
        timestamp: DateTime<Utc>,
        dry_code: u8,
        wet_code: u8,
        cfg: &PsychroConfig,
    ) -> Self {
        let dry = decode_temp(dry_code);
        let wet = decode_temp(wet_code);
        let psychro =
            relative_humidity(dry, wet, cfg).and_then(|rh| Ok((rh, dew_point(dry, wet, cfg)?)));
        let (rh_pct, dew_point_c) = match psychro {
            Ok((rh, dew)) => (Some(round6(rh)), Some(round6(dew))),
            Err(_) => (None, None),
        };
        PsychroRow {
            t_s: round6(t_s),
            timestamp: to_millis(timestamp),
            dry_code,
            dry_temp_c: round6(dry),
            wet_code,
            wet_temp_c: round6(wet),
            rh_pct,
            dew_point_c,
        }
    }

    fn to_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{:.6},{},{},{:.6},{},{:.6},{},{}",
            self.t_s,
            format_timestamp(&self.timestamp),
            self.dry_code,
            self.dry_temp_c,
            self.wet_code,
            self.wet_temp_c,
            opt(self.rh_pct),
            opt(self.dew_point_c),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub meta: RunMeta,
    pub rows: Vec<PsychroRow>,
}

fn meta_lines(meta: &RunMeta) -> Vec<String> {
    let channels = meta
        .channel_map
        .iter()
        .map(|(ch, input)| format!("{}:{input}", ch.name()))
        .collect::<Vec<_>>()
        .join(",");
    vec![
        format!("# run_id={}", meta.run_id),
        format!("# start={}", format_timestamp(&meta.start)),
        format!("# sample_rate_hz={}", meta.sample_rate_hz),
        format!("# channels={channels}"),
        format!("# config_fingerprint={}", meta.config_fingerprint),
    ]
}

pub fn to_csv_string(run: &RunLog) -> String {
    let mut out = String::new();
    for line in meta_lines(&run.meta) {
        out.push_str(&line);
        out.push_str(EOL);
    }
    out.push_str(HEADER);
    out.push_str(EOL);
    for row in &run.rows {
        out.push_str(&row.to_line());
        out.push_str(EOL);
    }
    out
}

/// Append-only writer that flushes after every row.
pub struct RunLogWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl RunLogWriter {
    pub fn create(path: impl AsRef<Path>, meta: &RunMeta) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|source| Error::Storage {
            path: path.clone(),
            source,
        })?;
        let mut writer = RunLogWriter {
            out: BufWriter::new(file),
            path,
        };
        let mut head = meta_lines(meta);
        head.push(HEADER.to_string());
        for line in head {
            writer.write_line(&line)?;
        }
        writer.flush()?;
        Ok(writer)
    }

    pub fn append(&mut self, row: &PsychroRow) -> Result<()> {
        self.write_line(&row.to_line())?;
        self.flush()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|()| self.out.write_all(EOL.as_bytes()))
            .map_err(|source| Error::Storage {
                path: self.path.clone(),
                source,
            })
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|source| Error::Storage {
            path: self.path.clone(),
            source,
        })
    }
}

pub fn write_csv(run: &RunLog, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = RunLogWriter::create(path, &run.meta)?;
    for row in &run.rows {
        writer.append(row)?;
    }
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<RunLog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Storage {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text)
}

#[derive(Default)]
struct MetaFields {
    run_id: Option<String>,
    start: Option<DateTime<Utc>>,
    sample_rate_hz: Option<f64>,
    channel_map: Option<Vec<(Channel, u8)>>,
    config_fingerprint: Option<String>,
}

fn parse_timestamp(text: &str, line: usize) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(text)
        .map(|ts| ts.with_timezone(&Utc))
        .map_err(|e| Error::parse(line, format!("bad timestamp '{text}': {e}")))
}

fn parse_f64(text: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = text
        .parse()
        .map_err(|_| Error::parse(line, format!("{column}: '{text}' is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(line, format!("{column}: non-finite value")))
    }
}

fn parse_code(text: &str, line: usize, column: &str) -> Result<u8> {
    text.parse()
        .map_err(|_| Error::parse(line, format!("{column}: '{text}' is not a code in 0..=255")))
}

fn parse_meta_line(fields: &mut MetaFields, body: &str, line: usize) -> Result<()> {
    let (key, value) = body
        .split_once('=')
        .ok_or_else(|| Error::parse(line, format!("metadata line without '=': '{body}'")))?;
    let (key, value) = (key.trim(), value.trim());
    match key {
        "run_id" => fields.run_id = Some(value.to_string()),
        "start" => fields.start = Some(parse_timestamp(value, line)?),
        "sample_rate_hz" => {
            let rate = parse_f64(value, line, "sample_rate_hz")?;
            if rate <= 0.0 {
                return Err(Error::parse(line, "sample_rate_hz must be > 0"));
            }
            fields.sample_rate_hz = Some(rate);
        }
        "channels" => {
            let map = value
                .split(',')
                .map(|entry| {
                    let (name, input) = entry.split_once(':').ok_or_else(|| {
                        Error::parse(line, format!("bad channel entry '{entry}'"))
                    })?;
                    let channel: Channel = name
                        .parse()
                        .map_err(|_| Error::parse(line, format!("unknown channel '{name}'")))?;
                    let input: u8 = input
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad mux input '{input}'")))?;
                    Ok((channel, input))
                })
                .collect::<Result<Vec<_>>>()?;
            fields.channel_map = Some(map);
        }
        "config_fingerprint" => fields.config_fingerprint = Some(value.to_string()),
        other => {
            return Err(Error::parse(
                line,
                format!("unknown metadata key '{other}'"),
            ))
        }
    }
    Ok(())
}

fn parse_row(text: &str, line: usize) -> Result<PsychroRow> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != COLUMNS {
        return Err(Error::parse(
            line,
            format!("expected {COLUMNS} columns, found {}", fields.len()),
        ));
    }
    let optional = |text: &str, column: &str| -> Result<Option<f64>> {
        if text.is_empty() {
            Ok(None)
        } else {
            parse_f64(text, line, column).map(Some)
        }
    };
    let row = PsychroRow {
        t_s: parse_f64(fields[0], line, "t_s")?,
        timestamp: parse_timestamp(fields[1], line)?,
        dry_code: parse_code(fields[2], line, "dry_code")?,
        dry_temp_c: parse_f64(fields[3], line, "dry_temp_c")?,
        wet_code: parse_code(fields[4], line, "wet_code")?,
        wet_temp_c: parse_f64(fields[5], line, "wet_temp_c")?,
        rh_pct: optional(fields[6], "rh_pct")?,
        dew_point_c: optional(fields[7], "dew_point_c")?,
    };
    for (code, temp, column) in [
        (row.dry_code, row.dry_temp_c, "dry_temp_c"),
        (row.wet_code, row.wet_temp_c, "wet_temp_c"),
    ] {
        if (decode_temp(code) - temp).abs() > TEMP_MATCH_TOLERANCE {
            return Err(Error::parse(
                line,
                format!("{column} {temp} does not decode from code {code}"),
            ));
        }
    }
    if row.rh_pct.is_some() != row.dew_point_c.is_some() {
        return Err(Error::parse(
            line,
            "rh_pct and dew_point_c must both be present or both empty",
        ));
    }
    Ok(row)
}

pub fn parse_csv(text: &str) -> Result<RunLog> {
    let mut meta = MetaFields::default();
    let mut header_seen = false;
    let mut rows: Vec<PsychroRow> = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            // Only the terminator after the last line may be empty.
            if idx + 1 == text.split('\n').count() {
                continue;
            }
            return Err(Error::parse(line_no, "blank line"));
        }
        if let Some(body) = line.strip_prefix('#') {
            if header_seen {
                return Err(Error::parse(line_no, "metadata after header"));
            }
            parse_meta_line(&mut meta, body.trim(), line_no)?;
            continue;
        }
        if !header_seen {
            if line != HEADER {
                let unknown: Vec<&str> = line
                    .split(',')
                    .filter(|col| !HEADER.split(',').any(|known| known == *col))
                    .collect();
                let msg = if unknown.is_empty() {
                    format!("header mismatch: expected '{HEADER}'")
                } else {
                    format!("unknown columns: {}", unknown.join(", "))
                };
                return Err(Error::parse(line_no, msg));
            }
            header_seen = true;
            continue;
        }
        let row = parse_row(line, line_no)?;
        if let Some(prev) = rows.last() {
            if row.t_s <= prev.t_s {
                return Err(Error::parse(line_no, "t_s must be strictly increasing"));
            }
        }
        rows.push(row);
    }

    if !header_seen {
        return Err(Error::parse(
            text.lines().count().max(1),
            "missing header line",
        ));
    }
    let missing = |what: &str| Error::parse(1, format!("missing metadata '{what}'"));
    Ok(RunLog {
        meta: RunMeta {
            run_id: meta.run_id.ok_or_else(|| missing("run_id"))?,
            start: meta.start.ok_or_else(|| missing("start"))?,
            sample_rate_hz: meta
                .sample_rate_hz
                .ok_or_else(|| missing("sample_rate_hz"))?,
            channel_map: meta.channel_map.ok_or_else(|| missing("channels"))?,
            config_fingerprint: meta
                .config_fingerprint
                .ok_or_else(|| missing("config_fingerprint"))?,
        },
        rows,
    })
}
