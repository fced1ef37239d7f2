//! Minimal deterministic SVG line plots.

use std::fmt::Write;

use crate::error::{CliError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 96.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const TARGET_TICKS: f64 = 5.0;

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const DASHES: [&str; 4] = ["", "6 3", "2 2", "8 3 2 3"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Stroke colour and dash pattern; fixed per model name so panels agree.
fn style(label: &str, index: usize) -> (&'static str, &'static str) {
    let k = match label {
        "MO" => 0,
        "MW" => 1,
        "SO" => 2,
        "SW" => 3,
        _ => index % COLORS.len(),
    };
    (COLORS[k], DASHES[k])
}

/// Tick spacing of the form {1, 2, 5} x 10^k.
fn nice_step(span: f64) -> f64 {
    let raw = span / TARGET_TICKS;
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let f = if m < 1.5 {
        1.0
    } else if m < 3.5 {
        2.0
    } else if m < 7.5 {
        5.0
    } else {
        10.0
    };
    f * mag
}

/// Axis range widened to whole ticks, and the tick positions.
fn axis(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    };
    let step = nice_step(hi - lo);
    let a = (lo / step).floor();
    let b = (hi / step).ceil();
    let ticks = (0..=(b - a) as i64).map(|k| (a + k as f64) * step).collect();
    (a * step, b * step, ticks)
}

fn tick_label(v: f64, step: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !(1e-3..1e5).contains(&step) {
        return format!("{v:.1e}");
    }
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `panel` as a standalone SVG document.
///
/// The output depends only on the input: fixed canvas, fixed styles,
/// coordinates rounded to two decimals.
pub fn emit_svg(panel: &Panel) -> Result<String> {
    if panel.series.is_empty() || panel.series.iter().any(|s| s.points.is_empty()) {
        return Err(CliError::invalid("cannot plot an empty data series"));
    }
    let all = || panel.series.iter().flat_map(|s| s.points.iter());
    if all().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(CliError::invalid("cannot plot non-finite values"));
    }
    let fold = |f: fn(&(f64, f64)) -> f64| {
        all().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (x_lo, x_hi) = fold(|p| p.0);
    let (y_lo, y_hi) = fold(|p| p.1);
    let (x0, x1, x_ticks) = axis(x_lo, x_hi);
    let (y0, y1, y_ticks) = axis(y_lo.min(0.0), y_hi);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let w = &mut out;
    // writing to a String cannot fail
    let _ = writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(w, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{}</text>"#, LEFT + pw / 2.0, escape(&panel.title));
    let _ = writeln!(w, r##"<g stroke="#999" stroke-width="0.5">"##);
    let x_step = x_ticks.get(1).map_or(1.0, |t| t - x_ticks[0]);
    let y_step = y_ticks.get(1).map_or(1.0, |t| t - y_ticks[0]);
    for &t in &x_ticks {
        let _ = writeln!(w, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#, px(t), TOP + ph, TOP + ph + 4.0);
    }
    for &t in &y_ticks {
        let _ = writeln!(w, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}"/>"#, LEFT - 4.0, py(t), LEFT);
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for &t in &x_ticks {
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, px(t), TOP + ph + 16.0, tick_label(t, x_step));
    }
    for &t in &y_ticks {
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, py(t) + 4.0, tick_label(t, y_step));
    }
    let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0, escape(&panel.x_label));
    let _ = writeln!(
        w,
        r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&panel.y_label)
    );
    for (k, s) in panel.series.iter().enumerate() {
        let (color, dash) = style(&s.label, k);
        let coords: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} data-series="{}" points="{}"/>"#,
            escape(&s.label),
            coords.join(" ")
        );
        let ly = TOP + 12.0 + 16.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(w, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash_attr}/>"#, lx + 24.0);
        let _ = writeln!(w, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&s.label));
    }
    let _ = writeln!(w, "</svg>");
    Ok(out)
}
