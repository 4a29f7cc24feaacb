//! Plot data and SVG figures for the all-satellite series.
//!
//! Each figure stacks six panels, one per output parameter. Plot-data files
//! hold one parameter each: a header line with the parameter name, then
//! `timestamp value` rows, one per sample (missing values as `NaN`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::aggregate::{HourlyStats, MinuteSeries, Param, ParamVector};
use crate::corpus::output::format_sci;
use crate::error::Result;
use crate::record::EpochTime;

const WIDTH: f64 = 1000.0;
const PANEL_HEIGHT: f64 = 140.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const PANEL_GAP: f64 = 12.0;

struct Panel {
    label: &'static str,
    values: Vec<Option<f64>>,
}

fn timestamp(t: &EpochTime) -> String {
    t.datetime().format("%Y-%m-%dT%H:%M:%S").to_string()
}

fn write_text(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text)?;
    Ok(path)
}

fn plot_data(param: Param, times: &[EpochTime], values: &[Option<f64>]) -> String {
    let mut out = format!("{}\n", param.name());
    for (t, v) in times.iter().zip(values) {
        let v = v.map_or_else(|| "NaN".to_string(), format_sci);
        let _ = writeln!(out, "{} {}", timestamp(t), v);
    }
    out
}

fn nobs_data(param: Param, times: &[EpochTime], values: &[u32]) -> String {
    let mut out = format!("{}\n", param.name());
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{} {}", timestamp(t), v);
    }
    out
}

fn column(vectors: &[ParamVector], p: Param) -> Vec<Option<f64>> {
    vectors.iter().map(|v| v.get(p)).collect()
}

/// Renders stacked panels sharing one time axis.
fn figure(title: &str, times: &[EpochTime], panels: &[Panel]) -> String {
    let height = MARGIN_TOP + panels.len() as f64 * (PANEL_HEIGHT + PANEL_GAP) + 30.0;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let secs: Vec<f64> = times
        .iter()
        .map(|t| t.datetime().and_utc().timestamp() as f64)
        .collect();
    let (t0, t1) = match (secs.first(), secs.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 0.0),
    };
    let x = |s: f64| {
        if t1 > t0 {
            MARGIN_LEFT + (s - t0) / (t1 - t0) * plot_w
        } else {
            MARGIN_LEFT + plot_w / 2.0
        }
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );

    for (i, panel) in panels.iter().enumerate() {
        let top = MARGIN_TOP + i as f64 * (PANEL_HEIGHT + PANEL_GAP);
        let finite: Vec<f64> = panel.values.iter().flatten().copied().collect();
        let (mut lo, mut hi) = finite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        if finite.is_empty() {
            (lo, hi) = (0.0, 1.0);
        } else if hi <= lo {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        let y = |v: f64| top + PANEL_HEIGHT - (v - lo) / (hi - lo) * PANEL_HEIGHT;

        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="10" y="{:.2}">{}</text>"#,
            top + PANEL_HEIGHT / 2.0,
            panel.label
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 4.0,
            top + 10.0,
            format_sci(hi)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 4.0,
            top + PANEL_HEIGHT,
            format_sci(lo)
        );

        // Missing samples break the trace; isolated points get a marker.
        let mut runs: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut current: Vec<(f64, f64)> = Vec::new();
        for (s, v) in secs.iter().zip(&panel.values) {
            match v {
                Some(v) => current.push((x(*s), y(*v))),
                None if !current.is_empty() => runs.push(std::mem::take(&mut current)),
                None => {}
            }
        }
        if !current.is_empty() {
            runs.push(current);
        }
        for run in runs {
            if run.len() == 1 {
                let _ = writeln!(
                    svg,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#1f4e9c"/>"##,
                    run[0].0, run[0].1
                );
                continue;
            }
            let points: Vec<String> = run.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
            let _ = writeln!(
                svg,
                r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1" points="{}"/>"##,
                points.join(" ")
            );
        }
    }

    if let (Some(first), Some(last)) = (times.first(), times.last()) {
        let base = MARGIN_TOP + panels.len() as f64 * (PANEL_HEIGHT + PANEL_GAP) + 10.0;
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN_LEFT}" y="{base}">{}</text>"#,
            timestamp(first)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{base}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN_RIGHT,
            timestamp(last)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// The 1-minute all-satellite figure and its plot data.
pub fn emit_minute_plots(series: &MinuteSeries, dir: &Path) -> Result<Vec<PathBuf>> {
    if series.is_empty() {
        log::warn!("empty 1-minute series, no plots written");
        return Ok(Vec::new());
    }
    fs::create_dir_all(dir)?;
    let times: Vec<EpochTime> = series.samples.iter().map(|(t, _)| *t).collect();
    let vectors: Vec<ParamVector> = series.samples.iter().map(|(_, v)| *v).collect();
    let mut written = Vec::new();
    let mut panels = Vec::new();
    for p in Param::ALL {
        let values = column(&vectors, p);
        written.push(write_text(
            dir.join(format!("All_1m_{}.txt", p.name())),
            &plot_data(p, &times, &values),
        )?);
        panels.push(Panel {
            label: p.name(),
            values,
        });
    }
    written.push(write_text(
        dir.join("All_1m.svg"),
        &figure("1-minute averages over all satellites", &times, &panels),
    )?);
    Ok(written)
}

/// The hourly mean, std and count figures with their plot data.
pub fn emit_hourly_plots(stats: &HourlyStats, dir: &Path) -> Result<Vec<PathBuf>> {
    if stats.rows.is_empty() {
        log::warn!("empty hourly statistics, no plots written");
        return Ok(Vec::new());
    }
    fs::create_dir_all(dir)?;
    let times: Vec<EpochTime> = stats.rows.iter().map(|r| r.start).collect();
    let means: Vec<ParamVector> = stats.rows.iter().map(|r| r.mean).collect();
    let stds: Vec<ParamVector> = stats.rows.iter().map(|r| r.std).collect();
    let mut written = Vec::new();

    for (kind, title, vectors) in [
        ("Means", "1-hour means over all satellites", &means),
        ("Std", "Standard deviation of 1-hour means", &stds),
    ] {
        let mut panels = Vec::new();
        for p in Param::ALL {
            let values = column(vectors, p);
            written.push(write_text(
                dir.join(format!("All_1h_{kind}_{}.txt", p.name())),
                &plot_data(p, &times, &values),
            )?);
            panels.push(Panel {
                label: p.name(),
                values,
            });
        }
        written.push(write_text(
            dir.join(format!("All_1h_{kind}.svg")),
            &figure(title, &times, &panels),
        )?);
    }

    let mut panels = Vec::new();
    for p in Param::ALL {
        let counts: Vec<u32> = stats.rows.iter().map(|r| r.nobs[p.index()]).collect();
        written.push(write_text(
            dir.join(format!("All_1h_Nobs_{}.txt", p.name())),
            &nobs_data(p, &times, &counts),
        )?);
        panels.push(Panel {
            label: p.name(),
            values: counts.iter().map(|&n| Some(f64::from(n))).collect(),
        });
    }
    written.push(write_text(
        dir.join("All_1h_Nobs.svg"),
        &figure("Number of observations per hour", &times, &panels),
    )?);
    Ok(written)
}
