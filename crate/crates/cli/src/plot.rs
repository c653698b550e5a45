//! Static SVG figures.
//!
//! Output is plain text built with `write!`, so identical input gives
//! byte-identical files.

use std::fmt::Write as _;
use std::io::Read;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Line,
    Scatter,
    /// `x` is the real part and `y` the imaginary part; both axes share
    /// one scale.
    ComplexPlane,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Draw markers instead of a connecting line.
    pub markers: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            x,
            y,
            markers: false,
        }
    }

    pub fn with_markers(mut self) -> Self {
        self.markers = true;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Labels {
    pub title: String,
    pub x: String,
    pub y: String,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Renders the series into a standalone SVG document with axes, tick labels
/// and a legend.
pub fn render_svg(series: &[Series], kind: PlotKind, labels: &Labels) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.x.is_empty()) {
        return Err(CliError::EmptySeries("no data points".into()));
    }
    for s in series {
        if s.x.len() != s.y.len() {
            return Err(CliError::config(format!(
                "series {} has {} x values but {} y values",
                s.name,
                s.x.len(),
                s.y.len()
            )));
        }
    }
    let finite = || {
        series
            .iter()
            .flat_map(|s| s.x.iter().zip(&s.y))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
    };
    if finite().next().is_none() {
        return Err(CliError::EmptySeries("no finite data points".into()));
    }
    let (mut x0, mut x1) = padded_range(finite().map(|p| *p.0));
    let (mut y0, mut y1) = padded_range(finite().map(|p| *p.1));

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    if kind == PlotKind::ComplexPlane {
        // equal units per pixel on both axes
        let per_px = ((x1 - x0) / pw).max((y1 - y0) / ph);
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        x0 = cx - per_px * pw / 2.0;
        x1 = cx + per_px * pw / 2.0;
        y0 = cy - per_px * ph / 2.0;
        y1 = cy + per_px * ph / 2.0;
    }
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if !labels.title.is_empty() {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&labels.title)
        );
    }

    // ticks and grid lines
    let _ = writeln!(w, r##"<g stroke="#dddddd" stroke-width="1">"##);
    let xt = ticks(x0, x1);
    let yt = ticks(y0, y1);
    for &t in &xt {
        let _ = writeln!(w, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#, sx(t), TOP, TOP + ph);
    }
    for &t in &yt {
        let _ = writeln!(w, r#"<line x1="{1:.2}" y1="{0:.2}" x2="{2:.2}" y2="{0:.2}"/>"#, sy(t), LEFT, LEFT + pw);
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(w, r#"<g text-anchor="middle">"#);
    for &t in &xt {
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, sx(t), TOP + ph + 16.0, tick_label(t, &xt));
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, r#"<g text-anchor="end">"#);
    for &t in &yt {
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, LEFT - 6.0, sy(t) + 4.0, tick_label(t, &yt));
    }
    let _ = writeln!(w, "</g>");
    let (xl, yl) = match kind {
        PlotKind::ComplexPlane if labels.x.is_empty() && labels.y.is_empty() => ("Re".to_string(), "Im".to_string()),
        _ => (labels.x.clone(), labels.y.clone()),
    };
    if !xl.is_empty() {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 14.0,
            escape(&xl)
        );
    }
    if !yl.is_empty() {
        let _ = writeln!(
            w,
            r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&yl)
        );
    }

    let _ = writeln!(
        w,
        r#"<clipPath id="plot-area"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#
    );
    let _ = writeln!(w, r#"<g clip-path="url(#plot-area)">"#);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .x
            .iter()
            .zip(&s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| (sx(x), sy(y)))
            .collect();
        let markers = kind == PlotKind::Scatter || s.markers || pts.len() == 1;
        if !markers {
            let mut d = String::new();
            for (k, (px, py)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{px:.2},{py:.2}", if k == 0 { "M" } else { " L" });
            }
            let _ = writeln!(w, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        } else {
            for (px, py) in &pts {
                let _ = writeln!(w, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#);
            }
        }
    }
    let _ = writeln!(w, "</g>");

    // legend
    let _ = writeln!(w, r#"<g class="legend">"#);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = LEFT + pw - 150.0;
        if kind == PlotKind::Scatter || s.markers {
            let _ = writeln!(w, r#"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="{color}"/>"#, x + 7.0, y - 7.0);
        } else {
            let _ = writeln!(
                w,
                r#"<line x1="{x:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="{color}" stroke-width="2"/>"#,
                y - 4.0,
                x + 20.0
            );
        }
        let _ = writeln!(w, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, x + 26.0, escape(&s.name));
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");
    Ok(out)
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let half = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - half, hi + half)
    }
}

/// Round tick positions, 4 to 10 of them.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| (hi - lo) / s <= 10.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(t: f64, all: &[f64]) -> String {
    let step = if all.len() > 1 { all[1] - all[0] } else { t.abs().max(1.0) };
    let big = all.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if big >= 1e5 || (big > 0.0 && big < 1e-3) {
        return format!("{t:.2e}");
    }
    let decimals = (0..8)
        .find(|&d| {
            let scaled = step * 10f64.powi(d);
            (scaled - scaled.round()).abs() < 1e-6 * scaled
        })
        .unwrap_or(8) as usize;
    let s = format!("{t:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads a headed CSV into series. For `line` and `scatter` the first
/// column is `x` and every other column is a series; for `complex-plane`
/// the columns are taken in (real, imaginary) pairs.
pub fn series_from_csv<R: Read>(input: R, kind: PlotKind, name: &str) -> Result<Vec<Series>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::config(format!("{name}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::config(format!("{name}: {e}")))?;
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                levlab_core::Error::schema(format!("{name}:{}:{}", row + 2, col + 1), format!("{field:?} is not a number"))
            })?;
            columns[col].push(v);
        }
    }
    if columns.first().is_none_or(|c| c.is_empty()) {
        return Err(CliError::EmptySeries(format!("{name} has no data rows")));
    }
    match kind {
        PlotKind::Line | PlotKind::Scatter => {
            if headers.len() < 2 {
                return Err(CliError::EmptySeries(format!("{name} needs an x column and at least one y column")));
            }
            Ok((1..headers.len())
                .map(|j| Series::new(headers[j].clone(), columns[0].clone(), columns[j].clone()))
                .collect())
        }
        PlotKind::ComplexPlane => {
            if headers.len() < 2 || !headers.len().is_multiple_of(2) {
                return Err(levlab_core::Error::schema(
                    format!("{name}:1"),
                    "complex-plane plots need columns in (re, im) pairs",
                )
                .into());
            }
            Ok((0..headers.len() / 2)
                .map(|j| {
                    let label = headers[2 * j]
                        .trim_start_matches("re_")
                        .trim_end_matches("_re")
                        .to_string();
                    Series::new(label, columns[2 * j].clone(), columns[2 * j + 1].clone())
                })
                .collect())
        }
    }
}
