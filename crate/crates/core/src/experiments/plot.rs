//! Minimal SVG line charts of sweep summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sweep::{read_summary, SummaryRow, SweepParam};
use crate::model::Scheme;
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

/// One line of a chart; `err` is the half-length of the error bar.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn scheme_color(s: Scheme) -> &'static str {
    match s {
        Scheme::Proposed => "#d62728",
        Scheme::Pbo => "#1f77b4",
        Scheme::Abo => "#2ca02c",
        Scheme::NoIrs => "#7f7f7f",
    }
}

fn scheme_label(s: Scheme) -> &'static str {
    match s {
        Scheme::Proposed => "Proposed (joint)",
        Scheme::Pbo => "PBO (passive only)",
        Scheme::Abo => "ABO (active only)",
        Scheme::NoIrs => "Without IRS",
    }
}

/// Step of roughly `span / target` rounded to 1, 2 or 5 times a power of ten.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = (span / target).max(f64::MIN_POSITIVE);
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Padded axis range and its ticks.
fn axis(lo: f64, hi: f64, pad_zero: bool) -> (f64, f64, Vec<f64>) {
    let (mut lo, mut hi) = (lo, hi);
    if pad_zero && lo > 0.0 {
        lo = 0.0;
    }
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        let d = hi.abs().max(1.0) * 0.5;
        lo -= d;
        hi += d;
    }
    let step = nice_step(hi - lo, 5.0);
    let lo = (lo / step).floor() * step;
    let hi = (hi / step).ceil() * step;
    let n = ((hi - lo) / step).round() as usize;
    let ticks = (0..=n).map(|k| lo + k as f64 * step).collect();
    (lo, hi, ticks)
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders a chart as a self-contained SVG document.
pub fn render_svg(chart: &Chart) -> String {
    let pts: Vec<(f64, f64, f64)> = chart.series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let finite = |v: &f64| v.is_finite();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).filter(finite).collect();
    let ylo: Vec<f64> = pts.iter().map(|p| p.1 - p.2.max(0.0)).filter(finite).collect();
    let yhi: Vec<f64> = pts.iter().map(|p| p.1 + p.2.max(0.0)).filter(finite).collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1, xt) = if xs.is_empty() { axis(0.0, 1.0, false) } else { axis(min(&xs), max(&xs), false) };
    let (y0, y1, yt) = if ylo.is_empty() { axis(0.0, 1.0, true) } else { axis(min(&ylo), max(&yhi), true) };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="Helvetica, Arial, sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&chart.title)
    );
    // grid and ticks
    for &t in &yt {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e6e6e6"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(t));
    }
    for &t in &xt {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#f0f0f0"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(&chart.y_label)
    );
    // series
    for series in &chart.series {
        let points: Vec<&(f64, f64, f64)> = series.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        let _ = writeln!(s, r#"<g class="series" stroke="{c}" fill="{c}">"#, c = series.color);
        if points.len() > 1 {
            let path: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke-width="2" points="{}"/>"#, path.join(" "));
        }
        for p in &points {
            let (x, y) = (sx(p.0), sy(p.1));
            if p.2.is_finite() && p.2 > 0.0 {
                let (a, b) = (sy(p.1 - p.2), sy(p.1 + p.2));
                let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{a:.2}" x2="{x:.2}" y2="{b:.2}" stroke-width="1"/>"#);
                for yy in [a, b] {
                    let _ = writeln!(s, r#"<line x1="{:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke-width="1"/>"#, x - 4.0, x + 4.0);
                }
            }
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5"/>"#);
        }
        let _ = writeln!(s, "</g>");
    }
    // legend
    let lx = LEFT + 12.0;
    let mut ly = TOP + 14.0;
    let legend_h = 18.0 * chart.series.len() as f64 + 6.0;
    let _ = writeln!(
        s,
        r##"<rect class="legend" x="{:.2}" y="{:.2}" width="170" height="{legend_h:.2}" fill="white" fill-opacity="0.85" stroke="#bbbbbb"/>"##,
        lx - 6.0,
        ly - 12.0
    );
    for series in &chart.series {
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            ly - 4.0,
            lx + 22.0,
            ly - 4.0,
            lx + 28.0,
            ly,
            escape(&series.name),
            c = series.color
        );
        ly += 18.0;
    }
    s.push_str("</svg>\n");
    s
}

/// WSR-versus-parameter chart with error bars `std / sqrt(count)`.
pub fn wsr_chart(param: SweepParam, rows: &[SummaryRow]) -> Chart {
    let series = Scheme::ALL
        .iter()
        .filter_map(|&scheme| {
            let points: Vec<(f64, f64, f64)> = rows
                .iter()
                .filter(|r| r.param == param && r.scheme == scheme && r.count > 0)
                .map(|r| (r.value, r.mean_wsr_bits, r.std_wsr_bits / (r.count as f64).sqrt()))
                .collect();
            (!points.is_empty()).then(|| Series { name: scheme_label(scheme).into(), color: scheme_color(scheme), points })
        })
        .collect();
    Chart {
        title: format!("Average weighted sum rate versus {}", param.name()),
        x_label: param.label().into(),
        y_label: "Average WSR (bits/s/Hz)".into(),
        series,
    }
}

/// Mean alternating iterations versus the parameter, for the schemes that alternate.
pub fn iterations_chart(param: SweepParam, rows: &[SummaryRow]) -> Chart {
    let series = [Scheme::Proposed, Scheme::Pbo]
        .iter()
        .filter_map(|&scheme| {
            let points: Vec<(f64, f64, f64)> = rows
                .iter()
                .filter(|r| r.param == param && r.scheme == scheme && r.count > 0)
                .map(|r| (r.value, r.mean_outer_iters, 0.0))
                .collect();
            (!points.is_empty()).then(|| Series { name: scheme_label(scheme).into(), color: scheme_color(scheme), points })
        })
        .collect();
    Chart {
        title: format!("Average outer iterations versus {}", param.name()),
        x_label: param.label().into(),
        y_label: "Outer iterations at t*".into(),
        series,
    }
}

/// Writes one WSR chart per swept parameter in the summary, plus an
/// iteration chart for antenna and element sweeps. Returns the files written.
pub fn emit_plots(summary_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_summary(summary_csv)?;
    if rows.is_empty() {
        return Err(Error::MalformedCsv { path: summary_csv.to_path_buf(), message: "no summary rows".into() });
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: String, chart: Chart| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, render_svg(&chart)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for param in SweepParam::ALL {
        if !rows.iter().any(|r| r.param == param) {
            continue;
        }
        write(format!("wsr_vs_{}.svg", param.name()), wsr_chart(param, &rows))?;
        if matches!(param, SweepParam::NIrs | SweepParam::MAntennas) {
            let chart = iterations_chart(param, &rows);
            if !chart.series.is_empty() {
                write(format!("iterations_vs_{}.svg", param.name()), chart)?;
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(value: f64, scheme: Scheme, mean: f64) -> SummaryRow {
        SummaryRow {
            param: SweepParam::NIrs,
            value,
            scheme,
            count: 4,
            failed: 0,
            mean_wsr_bits: mean,
            std_wsr_bits: 0.4,
            mean_t_star: 0.2,
            mean_outer_iters: 5.0,
        }
    }

    #[test]
    fn nice_ticks() {
        assert_eq!(nice_step(10.0, 5.0), 2.0);
        assert_eq!(nice_step(0.7, 5.0), 0.2);
        let (lo, hi, ticks) = axis(3.2, 27.9, true);
        assert_eq!(lo, 0.0);
        assert!(hi >= 27.9 && ticks.len() >= 3);
    }

    #[test]
    fn single_point_renders() {
        let rows = vec![summary(10.0, Scheme::Proposed, 3.0)];
        let svg = render_svg(&wsr_chart(SweepParam::NIrs, &rows));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn one_legend_entry_per_scheme() {
        let rows: Vec<SummaryRow> = Scheme::ALL
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| [10.0, 20.0].map(|v| summary(v, s, v / 10.0 + k as f64)))
            .collect();
        let svg = render_svg(&wsr_chart(SweepParam::NIrs, &rows));
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), 4);
        assert_eq!(svg.matches("<polyline").count(), 4);
        let iters = render_svg(&iterations_chart(SweepParam::NIrs, &rows));
        assert_eq!(iters.matches("class=\"legend-entry\"").count(), 2);
    }

    #[test]
    fn labels_are_escaped() {
        let chart = Chart { title: "a<b & c".into(), x_label: "x".into(), y_label: "y".into(), series: vec![] };
        assert!(render_svg(&chart).contains("a&lt;b &amp; c"));
    }
}
