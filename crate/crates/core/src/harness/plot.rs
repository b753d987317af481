//! SVG line charts of per-round metrics: the across-seed mean of each
//! algorithm with a min/max band.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::MetricsTable;
use crate::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Metric columns plotted by default.
pub const DEFAULT_METRICS: [&str; 3] = ["global_train_loss", "test_metric_1", "test_metric_2"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub algorithm: String,
    /// (round, mean, min, max)
    pub points: Vec<(usize, f64, f64, f64)>,
    pub seeds: usize,
}

/// Per-algorithm summaries of `metric`; empty cells are skipped.
pub fn summarize(table: &MetricsTable, metric: &str) -> Result<Vec<Series>> {
    let a = table.column("algorithm")?;
    let s = table.column("seed")?;
    let r = table.column("round")?;
    let m = table.column(metric)?;
    let mut groups: BTreeMap<&str, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    let mut seeds: BTreeMap<&str, std::collections::BTreeSet<&str>> = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        let cell = |c: usize| row.get(c).map(String::as_str).unwrap_or("");
        let value = cell(m);
        if value.is_empty() {
            continue;
        }
        let bad = |column: &str, message: String| Error::CsvCell {
            row: i as u64 + 2,
            column: column.to_string(),
            message,
        };
        let v: f64 = value.parse().map_err(|e| bad(metric, format!("{e}")))?;
        let round: usize = cell(r).parse().map_err(|e| bad("round", format!("{e}")))?;
        groups.entry(cell(a)).or_default().entry(round).or_default().push(v);
        seeds.entry(cell(a)).or_default().insert(cell(s));
    }
    Ok(groups
        .into_iter()
        .map(|(alg, rounds)| Series {
            algorithm: alg.to_string(),
            seeds: seeds[alg].len(),
            points: rounds
                .into_iter()
                .map(|(round, vs)| {
                    let mean = vs.iter().sum::<f64>() / vs.len() as f64;
                    let lo = vs.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (round, mean, lo, hi)
                })
                .collect(),
        })
        .collect())
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// Renders one chart. Bands are drawn only for series with several seeds.
pub fn render_svg(title: &str, metric: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_max, mut y_lo, mut y_hi) = (1usize, f64::INFINITY, f64::NEG_INFINITY);
    for &(r, _, lo, hi) in all {
        x_max = x_max.max(r);
        y_lo = y_lo.min(lo);
        y_hi = y_hi.max(hi);
    }
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    let (y_lo, y_hi) = nice_range(y_lo, y_hi);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |r: usize| LEFT + plot_w * r as f64 / x_max as f64;
    let py = |v: f64| TOP + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    // axes and ticks
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT:.1},{TOP:.1} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for i in 0..=5 {
        let v = y_lo + (y_hi - y_lo) * i as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT - 4.0,
            LEFT - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let step = (x_max as f64 / 10.0).ceil().max(1.0) as usize;
    for r in (0..=x_max).step_by(step) {
        let x = px(r);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{r}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 4.0,
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">round</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(metric)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.seeds > 1 && !s.points.is_empty() {
            let mut d = String::new();
            for (j, &(r, _, _, hi)) in s.points.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, px(r), py(hi));
            }
            for &(r, _, lo, _) in s.points.iter().rev() {
                let _ = write!(d, "L{:.2},{:.2} ", px(r), py(lo));
            }
            let _ = writeln!(svg, r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, d);
        }
        let pts: Vec<String> = s.points.iter().map(|&(r, m, _, _)| format!("{:.2},{:.2}", px(r), py(m))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 16.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.algorithm)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<stem>_<metric>.svg` into `out_dir` for each metric. With
/// `metrics = None` the default columns that hold any values are plotted;
/// an explicitly requested column must exist.
pub fn emit_plot(metrics_file: &Path, out_dir: &Path, metrics: Option<&[String]>) -> Result<Vec<PathBuf>> {
    let table = MetricsTable::read(metrics_file)?;
    let chosen: Vec<String> = match metrics {
        Some(list) => {
            for m in list {
                table.column(m)?;
            }
            list.to_vec()
        }
        None => {
            let mut v = Vec::new();
            for m in DEFAULT_METRICS {
                if table.has_values(m)? {
                    v.push(m.to_string());
                }
            }
            v
        }
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let stem = metrics_file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "metrics".into());
    let mut written = Vec::new();
    for m in &chosen {
        let series = summarize(&table, m)?;
        let svg = render_svg(&format!("{stem}: {m}"), m, &series);
        let path = out_dir.join(format!("{stem}_{m}.svg"));
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
