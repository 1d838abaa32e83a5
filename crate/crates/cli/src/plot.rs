//! Deterministic SVG line plots of CSV columns.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Which columns to draw and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    #[serde(default)]
    pub log_x: bool,
    #[serde(default)]
    pub log_y: bool,
    #[serde(default)]
    pub title: String,
}

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("missing column(s) {missing:?}; available: {available:?}")]
    MissingColumns {
        missing: Vec<String>,
        available: Vec<String>,
    },
    #[error("no plottable rows (need finite values, positive on log axes)")]
    Empty,
    #[error("invalid plot spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A CSV file as named numeric columns; empty or non-numeric cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, PlotError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn from_reader<R: std::io::Read>(r: R) -> Result<Self, PlotError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (col, cell) in columns.iter_mut().zip(rec.iter()) {
                col.push(cell.trim().parse().unwrap_or(f64::NAN));
            }
        }
        Ok(Self { headers, columns })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }
}

/// What was drawn: the SVG text and, per series, the least-squares slope in
/// plot coordinates (after the log transforms).
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub svg: String,
    pub slopes: Vec<Option<f64>>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn transform(v: f64, log: bool) -> Option<f64> {
    let t = if log {
        if v > 0.0 {
            v.log10()
        } else {
            return None;
        }
    } else {
        v
    };
    t.is_finite().then_some(t)
}

pub fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.1}")
    } else if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Expands a degenerate range so the axis has nonzero length.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Renders the columns of `table` selected by `spec`.
pub fn render(table: &Table, spec: &PlotSpec) -> Result<Plot, PlotError> {
    if spec.y.is_empty() {
        return Err(PlotError::Spec("y must name at least one column".into()));
    }
    let missing: Vec<String> = std::iter::once(&spec.x)
        .chain(&spec.y)
        .filter(|c| table.column(c).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(PlotError::MissingColumns {
            missing,
            available: table.headers.clone(),
        });
    }
    let xs = table.column(&spec.x).expect("checked");
    let series: Vec<Vec<(f64, f64)>> = spec
        .y
        .iter()
        .map(|name| {
            let ys = table.column(name).expect("checked");
            xs.iter()
                .zip(ys)
                .filter_map(|(&x, &y)| Some((transform(x, spec.log_x)?, transform(y, spec.log_y)?)))
                .collect()
        })
        .collect();
    let all: Vec<&(f64, f64)> = series.iter().flatten().collect();
    if all.is_empty() {
        return Err(PlotError::Empty);
    }
    let (x0, x1) = padded(
        all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = padded(
        all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (tx, ty) = (px(xv), py(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{tx:.2}" y1="{:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/>
<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>
<line x1="{:.2}" y1="{ty:.2}" x2="{LEFT:.2}" y2="{ty:.2}" stroke="black"/>
<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick_label(xv, spec.log_x),
            LEFT - 5.0,
            LEFT - 8.0,
            ty + 4.0,
            tick_label(yv, spec.log_y),
        );
    }
    let axis_name = |name: &str, log: bool| {
        if log {
            format!("log10 {name}")
        } else {
            name.to_string()
        }
    };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>
<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>
<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + 0.5 * pw,
        HEIGHT - 15.0,
        escape(&axis_name(&spec.x, spec.log_x)),
        TOP + 0.5 * ph,
        TOP + 0.5 * ph,
        escape(&axis_name(&spec.y.join(", "), spec.log_y)),
        LEFT + 0.5 * pw,
        escape(&spec.title),
    );
    for (k, pts) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>
<text x="{:.2}" y="{:.2}" fill="{colour}">{}</text>"#,
            path.join(" "),
            LEFT + 10.0,
            TOP + 16.0 * (k + 1) as f64,
            escape(&spec.y[k]),
        );
    }
    s.push_str("</svg>\n");
    Ok(Plot {
        svg: s,
        slopes: series.iter().map(|p| slope(p)).collect(),
    })
}
