//! Static charts of one run-log column against time: a fixed-size text chart
//! for terminals and an SVG polyline for documents.

use std::fmt::Write;

use clap::ValueEnum;
use paraloq::{Error, Result, RunLog};

pub const ASCII_WIDTH: usize = 80;
pub const ASCII_HEIGHT: usize = 24;
const LABEL_WIDTH: usize = 10;
const PLOT_WIDTH: usize = ASCII_WIDTH - LABEL_WIDTH - 2;
const PLOT_HEIGHT: usize = ASCII_HEIGHT - 2;

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 400.0;
const SVG_LEFT: f64 = 80.0;
const SVG_RIGHT: f64 = 20.0;
const SVG_TOP: f64 = 40.0;
const SVG_BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Column {
    #[value(name = "dry_code")]
    DryCode,
    #[value(name = "dry_temp_c")]
    DryTempC,
    #[value(name = "wet_code")]
    WetCode,
    #[value(name = "wet_temp_c")]
    WetTempC,
    #[value(name = "rh_pct")]
    RhPct,
    #[value(name = "dew_point_c")]
    DewPointC,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::DryCode => "dry_code",
            Column::DryTempC => "dry_temp_c",
            Column::WetCode => "wet_code",
            Column::WetTempC => "wet_temp_c",
            Column::RhPct => "rh_pct",
            Column::DewPointC => "dew_point_c",
        }
    }

    /// `(t_s, value)` for every row where the column has a value.
    pub fn points(self, log: &RunLog) -> Vec<(f64, f64)> {
        log.rows
            .iter()
            .filter_map(|r| {
                let v = match self {
                    Column::DryCode => Some(r.dry_code as f64),
                    Column::DryTempC => Some(r.dry_temp_c),
                    Column::WetCode => Some(r.wet_code as f64),
                    Column::WetTempC => Some(r.wet_temp_c),
                    Column::RhPct => r.rh_pct,
                    Column::DewPointC => r.dew_point_c,
                };
                v.map(|v| (r.t_s, v))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Ascii,
    Svg,
}

struct Extent {
    t0: f64,
    t1: f64,
    min: f64,
    max: f64,
}

impl Extent {
    fn of(points: &[(f64, f64)]) -> Result<Extent> {
        let (&(t0, _), &(t1, _)) = points
            .first()
            .zip(points.last())
            .ok_or(Error::EmptyInput("column has no values to plot"))?;
        let (min, max) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
                (lo.min(v), hi.max(v))
            });
        Ok(Extent { t0, t1, min, max })
    }

    /// Position along time in `[0, 1]`.
    fn x(&self, t: f64) -> f64 {
        if self.t1 > self.t0 {
            (t - self.t0) / (self.t1 - self.t0)
        } else {
            0.0
        }
    }

    /// Distance below the maximum in `[0, 1]`; a flat series sits mid-height.
    fn y(&self, v: f64) -> f64 {
        if self.max > self.min {
            (self.max - v) / (self.max - self.min)
        } else {
            0.5
        }
    }
}

fn value_label(v: f64) -> String {
    let fixed = format!("{v:.3}");
    if fixed.len() <= LABEL_WIDTH {
        fixed
    } else {
        format!("{v:.2e}")
    }
}

/// An exactly 80×24 character chart. The first and last plot rows carry the
/// maximum and minimum labels; the bottom two lines hold the time axis.
pub fn render_ascii(points: &[(f64, f64)], column: Column) -> Result<String> {
    let ext = Extent::of(points)?;
    let mut grid = vec![[' '; PLOT_WIDTH]; PLOT_HEIGHT];
    for &(t, v) in points {
        let col = (ext.x(t) * (PLOT_WIDTH - 1) as f64).round() as usize;
        let row = (ext.y(v) * (PLOT_HEIGHT - 1) as f64).round() as usize;
        grid[row][col] = '*';
    }

    let mut out = String::with_capacity((ASCII_WIDTH + 1) * ASCII_HEIGHT);
    for (r, cells) in grid.iter().enumerate() {
        let label = match r {
            0 => value_label(ext.max),
            r if r == PLOT_HEIGHT - 1 => value_label(ext.min),
            _ => String::new(),
        };
        let cells: String = cells.iter().collect();
        writeln!(out, "{label:>LABEL_WIDTH$} |{cells}").unwrap();
    }

    let title = format!(" {} ", column.name());
    let left = (PLOT_WIDTH - title.len()) / 2;
    let right = PLOT_WIDTH - title.len() - left;
    writeln!(
        out,
        "{:LABEL_WIDTH$} +{}{title}{}",
        "",
        "-".repeat(left),
        "-".repeat(right)
    )
    .unwrap();

    let start = format!("{:.1} s", ext.t0);
    let end = format!("{:.1} s", ext.t1);
    let gap = PLOT_WIDTH + 1 - start.len();
    writeln!(out, "{:LABEL_WIDTH$} {start}{end:>gap$}", "").unwrap();
    Ok(out)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// A polyline chart with both axes, min/max and time labels and the column
/// name as title.
pub fn render_svg(points: &[(f64, f64)], column: Column) -> Result<String> {
    let ext = Extent::of(points)?;
    let (x0, x1) = (SVG_LEFT, SVG_WIDTH - SVG_RIGHT);
    let (y0, y1) = (SVG_TOP, SVG_HEIGHT - SVG_BOTTOM);
    let px = |t: f64| x0 + ext.x(t) * (x1 - x0);
    let py = |v: f64| y0 + ext.y(v) * (y1 - y0);
    let title = escape(column.name());

    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, "  <title>{title}</title>").unwrap();
    writeln!(
        out,
        r#"  <rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"  <text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
        (x0 + x1) / 2.0
    )
    .unwrap();
    writeln!(
        out,
        r#"  <g class="axes" stroke="black" stroke-width="1">
    <line x1="{x0:.2}" y1="{y1:.2}" x2="{x1:.2}" y2="{y1:.2}"/>
    <line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>
  </g>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"  <g class="labels" font-family="monospace" font-size="12">
    <text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>
    <text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>
    <text x="{x0:.2}" y="{:.2}" text-anchor="start">{:.1} s</text>
    <text x="{x1:.2}" y="{:.2}" text-anchor="end">{:.1} s</text>
  </g>"#,
        x0 - 6.0,
        py(ext.max) + 4.0,
        value_label(ext.max),
        x0 - 6.0,
        py(ext.min) + 4.0,
        value_label(ext.min),
        y1 + 20.0,
        ext.t0,
        y1 + 20.0,
        ext.t1,
    )
    .unwrap();
    let coords: Vec<String> = points
        .iter()
        .map(|&(t, v)| format!("{:.2},{:.2}", px(t), py(v)))
        .collect();
    writeln!(
        out,
        r##"  <polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
        coords.join(" ")
    )
    .unwrap();
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

pub fn render(log: &RunLog, column: Column, format: Format) -> Result<String> {
    let points = column.points(log);
    match format {
        Format::Ascii => render_ascii(&points, column),
        Format::Svg => render_svg(&points, column),
    }
}
