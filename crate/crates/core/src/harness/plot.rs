//! Static SVG plots. Output bytes depend only on the input.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::radio::Rat;

use super::episode::EpisodeLog;
use super::experiment::ComparisonTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Bars,
    Timeline,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bars" => Ok(PlotKind::Bars),
            "timeline" => Ok(PlotKind::Timeline),
            _ => Err(Error::Usage(format!(
                "unknown plot kind `{s}` (bars, timeline)"
            ))),
        }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;
const THROUGHPUT_COLOR: &str = "#3b6ea8";
const DELAY_COLOR: &str = "#d08c2e";
const LTE_COLOR: &str = "#5a9e4b";
const NR_COLOR: &str = "#8e4ba0";

fn num(x: f64) -> String {
    format!("{:.2}", x)
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = num(width),
        h = num(height)
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// Grouped bars: one group per agent, mean throughput (Mbit/s, left scale)
/// and mean delay (ms, right scale) side by side.
pub fn bars_svg(table: &ComparisonTable) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::Usage(
            "nothing to plot: the table has no rows".into(),
        ));
    }
    let max_thr = table
        .rows
        .iter()
        .map(|r| r.throughput_bps.mean)
        .fold(0.0, f64::max)
        .max(1.0);
    let max_delay = table
        .rows
        .iter()
        .map(|r| r.delay_ms.mean)
        .fold(0.0, f64::max)
        .max(1e-9);
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let group_w = (WIDTH - 2.0 * MARGIN) / table.rows.len() as f64;
    let bar_w = group_w * 0.3;

    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT);
    let base = HEIGHT - MARGIN;
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="black"/>"#,
        x0 = num(MARGIN),
        x1 = num(WIDTH - MARGIN),
        y = num(base)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">throughput (max {} Mbit/s)</text>"#,
        num(MARGIN),
        num(MARGIN - 20.0),
        num(max_thr / 1e6)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">delay (max {} ms)</text>"#,
        num(WIDTH - MARGIN),
        num(MARGIN - 20.0),
        num(max_delay)
    );
    for (i, row) in table.rows.iter().enumerate() {
        let gx = MARGIN + i as f64 * group_w + group_w * 0.15;
        let _ = writeln!(out, r#"<g class="group" data-agent="{}">"#, row.agent);
        let bars = [
            (
                "throughput",
                row.throughput_bps.mean / max_thr,
                THROUGHPUT_COLOR,
                row.throughput_bps.mean,
            ),
            (
                "delay",
                row.delay_ms.mean / max_delay,
                DELAY_COLOR,
                row.delay_ms.mean,
            ),
        ];
        for (k, (metric, frac, color, value)) in bars.into_iter().enumerate() {
            let h = plot_h * frac.clamp(0.0, 1.0);
            let _ = writeln!(
                out,
                r#"<rect class="bar" data-metric="{metric}" data-value="{value}" x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
                num(gx + k as f64 * bar_w),
                num(base - h),
                num(bar_w),
                num(h)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(gx + bar_w),
            num(base + 16.0),
            row.agent
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One row per UE showing its RAT over the episode; a marker at every
/// switch between RATs.
pub fn timeline_svg(log: &EpisodeLog) -> Result<String> {
    if log.decisions.is_empty() {
        return Err(Error::Usage(
            "nothing to plot: the log has no steering decisions".into(),
        ));
    }
    let horizon = log
        .episode_ttis
        .max(log.decisions.iter().map(|d| d.tti + 1).max().unwrap_or(1)) as f64;
    let row_h = 8.0;
    let height = 2.0 * MARGIN + row_h * log.n_ues as f64;
    let x_of = |tti: u64| MARGIN + (WIDTH - 2.0 * MARGIN) * tti as f64 / horizon;
    let color = |rat: Rat| if rat == Rat::Lte { LTE_COLOR } else { NR_COLOR };

    let mut out = String::new();
    header(&mut out, WIDTH, height);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">RAT per UE over {} TTIs (lte {LTE_COLOR}, nr {NR_COLOR})</text>"#,
        num(MARGIN),
        num(MARGIN - 20.0),
        horizon
    );

    // Per UE, each decision holds until the next one.
    let mut by_ue: Vec<Vec<(u64, Rat)>> = vec![Vec::new(); log.n_ues];
    for d in &log.decisions {
        by_ue[d.ue_id].push((d.tti, d.chosen));
    }
    for (ue, segs) in by_ue.iter().enumerate() {
        let y = MARGIN + row_h * ue as f64 + row_h / 2.0;
        let mut run_start: Option<(u64, Rat)> = None;
        let ends = segs
            .iter()
            .map(|&(t, r)| Some((t, r)))
            .chain(std::iter::once(None));
        for next in ends {
            let boundary = next.map(|(t, _)| t).unwrap_or(horizon as u64);
            if let Some((t0, rat)) = run_start {
                if next.is_none_or(|(_, r)| r != rat) {
                    let _ = writeln!(
                        out,
                        r#"<line class="segment" data-ue="{ue}" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="{}"/>"#,
                        num(x_of(t0)),
                        num(x_of(boundary)),
                        color(rat),
                        num(row_h * 0.7),
                        y = num(y)
                    );
                    run_start = next;
                }
            } else {
                run_start = next;
            }
        }
    }
    for e in log.switches() {
        let y = MARGIN + row_h * e.ue_id as f64 + row_h / 2.0;
        let _ = writeln!(
            out,
            r#"<circle class="switch" data-ue="{}" data-tti="{}" cx="{}" cy="{}" r="3" fill="black"/>"#,
            e.ue_id,
            e.tti,
            num(x_of(e.tti)),
            num(y)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn write(path: &Path, svg: String) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, svg).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_bars(table: &ComparisonTable, path: &Path) -> Result<()> {
    write(path, bars_svg(table)?)
}

pub fn emit_timeline(log: &EpisodeLog, path: &Path) -> Result<()> {
    write(path, timeline_svg(log)?)
}
