//! Exponential smoothing and SVG learning curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::record::{Phase, RunRow, METRICS};
use crate::error::{EbeError, Result};

/// Raw values with their exponentially smoothed counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSeries {
    pub raw: Vec<f64>,
    pub weight: f64,
    pub smoothed: Vec<f64>,
}

/// `s₀ = x₀`, `sₜ = w sₜ₋₁ + (1 − w) xₜ`.
pub fn ema_smooth(raw: &[f64], weight: f64) -> Result<SmoothedSeries> {
    if !(0.0..1.0).contains(&weight) {
        return Err(EbeError::OutOfRange(format!("smoothing weight {weight} not in [0, 1)")));
    }
    let mut smoothed = Vec::with_capacity(raw.len());
    for (t, &x) in raw.iter().enumerate() {
        smoothed.push(if t == 0 { x } else { weight * smoothed[t - 1] + (1.0 - weight) * x });
    }
    Ok(SmoothedSeries { raw: raw.to_vec(), weight, smoothed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub metrics: Vec<String>,
    pub smoothing: f64,
    pub phase: Phase,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self { metrics: vec!["reward".into()], smoothing: 0.99, phase: Phase::Train }
    }
}

/// `(episode, mean over seeds)` for one strategy and metric, ordered by episode.
pub fn mean_curve(rows: &[RunRow], strategy: &str, metric: &str, phase: Phase) -> Result<Vec<(u64, f64)>> {
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.strategy == strategy && r.phase == phase) {
        if let Some(v) = r.metric(metric)? {
            let e = acc.entry(r.episode).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    Ok(acc.into_iter().map(|(ep, (sum, n))| (ep, sum / n as f64)).collect())
}

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const WIDTH: f64 = 720.0;
const CHART_HEIGHT: f64 = 320.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn points(xs: &[u64], ys: &[f64], x_range: (f64, f64), y_range: (f64, f64), top: f64) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let mut out = String::new();
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let px = MARGIN_LEFT + (x as f64 - x_range.0) / (x_range.1 - x_range.0) * plot_w;
        let py = top + MARGIN_TOP + (1.0 - (y - y_range.0) / (y_range.1 - y_range.0)) * plot_h;
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{px:.2},{py:.2}").expect("writing to a string");
    }
    out
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// SVG with one chart per metric. Each strategy gets a low-opacity polyline
/// of the raw seed mean and a solid polyline of its smoothed version.
pub fn render_curves(rows: &[RunRow], options: &PlotOptions) -> Result<String> {
    if options.metrics.is_empty() {
        return Err(EbeError::Empty("metric list"));
    }
    for m in &options.metrics {
        if !METRICS.contains(&m.as_str()) {
            return Err(EbeError::UnknownMetric(m.clone()));
        }
    }
    let strategies: Vec<&str> = {
        let mut s: Vec<&str> = rows.iter().map(|r| r.strategy.as_str()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let total_h = CHART_HEIGHT * options.metrics.len() as f64;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{total_h}" viewBox="0 0 {WIDTH} {total_h}" font-family="sans-serif" font-size="12">"#
    )
    .expect("writing to a string");
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).expect("writing to a string");

    for (k, metric) in options.metrics.iter().enumerate() {
        let top = k as f64 * CHART_HEIGHT;
        let mut series = Vec::new();
        for (i, s) in strategies.iter().enumerate() {
            let curve = mean_curve(rows, s, metric, options.phase)?;
            if curve.is_empty() {
                continue;
            }
            let xs: Vec<u64> = curve.iter().map(|p| p.0).collect();
            let raw: Vec<f64> = curve.iter().map(|p| p.1).collect();
            let sm = ema_smooth(&raw, options.smoothing)?;
            series.push((i, xs, sm));
        }
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (_, xs, sm) in &series {
            x_lo = x_lo.min(xs[0] as f64);
            x_hi = x_hi.max(xs[xs.len() - 1] as f64);
            for &v in sm.raw.iter().chain(&sm.smoothed) {
                y_lo = y_lo.min(v);
                y_hi = y_hi.max(v);
            }
        }
        if series.is_empty() {
            (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
        }
        let x_range = if x_hi > x_lo { (x_lo, x_hi) } else { (x_lo - 0.5, x_hi + 0.5) };
        let y_range = padded(y_lo, y_hi);
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

        writeln!(svg, r#"<g class="chart" data-metric="{}">"#, escape(metric)).expect("writing to a string");
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{} ({})</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            top + MARGIN_TOP - 14.0,
            escape(metric),
            options.phase.as_str()
        )
        .expect("writing to a string");
        writeln!(
            svg,
            r##"<rect x="{MARGIN_LEFT}" y="{:.2}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##,
            top + MARGIN_TOP
        )
        .expect("writing to a string");
        for (frac, anchor) in [(0.0, "start"), (1.0, "end")] {
            let xv = x_range.0 + frac * (x_range.1 - x_range.0);
            writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
                MARGIN_LEFT + frac * plot_w,
                top + CHART_HEIGHT - MARGIN_BOTTOM + 16.0,
                format_tick(xv)
            )
            .expect("writing to a string");
        }
        for frac in [0.0, 0.5, 1.0] {
            let yv = y_range.0 + frac * (y_range.1 - y_range.0);
            writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 6.0,
                top + MARGIN_TOP + (1.0 - frac) * plot_h + 4.0,
                format_tick(yv)
            )
            .expect("writing to a string");
        }
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">episode</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            top + CHART_HEIGHT - 12.0
        )
        .expect("writing to a string");

        for (i, xs, sm) in &series {
            let color = PALETTE[i % PALETTE.len()];
            writeln!(
                svg,
                r#"<polyline class="ghost" fill="none" stroke="{color}" stroke-opacity="0.25" stroke-width="1" points="{}"/>"#,
                points(xs, &sm.raw, x_range, y_range, top)
            )
            .expect("writing to a string");
            writeln!(
                svg,
                r#"<polyline class="solid" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                points(xs, &sm.smoothed, x_range, y_range, top)
            )
            .expect("writing to a string");
        }

        writeln!(svg, r#"<g class="legend">"#).expect("writing to a string");
        for (row, (i, s)) in strategies.iter().enumerate().enumerate() {
            let y = top + MARGIN_TOP + 10.0 + row as f64 * 18.0;
            let x = WIDTH - MARGIN_RIGHT + 14.0;
            let color = PALETTE[i % PALETTE.len()];
            writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text class="legend-entry" x="{:.2}" y="{:.2}">{}</text>"#,
                x + 20.0,
                x + 26.0,
                y + 4.0,
                escape(s)
            )
            .expect("writing to a string");
        }
        writeln!(svg, "</g>\n</g>").expect("writing to a string");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn format_tick(v: f64) -> String {
    if v == v.round() && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}
