//! CSV, SVG and sidecar writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! a file back reproduces the table bit for bit.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::run::{AggregateRow, ExperimentResults, RawRow, ResultsTable};
use super::HarnessError;

pub const RAW_FILE: &str = "raw.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SVG_FILE: &str = "regret.svg";
pub const SIDECAR_FILE: &str = "experiment.toml";

pub const RAW_HEADER: [&str; 7] = [
    "policy",
    "rep",
    "t",
    "inst_regret",
    "cum_regret",
    "est_error_l2",
    "gram_min_eig",
];
pub const AGGREGATE_HEADER: [&str; 4] = ["policy", "t", "cum_regret_mean", "cum_regret_std"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => HarnessError::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>, HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

pub fn write_raw_csv(rows: &[RawRow], path: &Path) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    w.write_record(RAW_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let est = r.est_error_l2.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.policy.clone(),
            r.rep.to_string(),
            r.t.to_string(),
            r.inst_regret.to_string(),
            r.cum_regret.to_string(),
            est,
            r.gram_min_eig.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    w.write_record(AGGREGATE_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.t.to_string(),
            r.cum_regret_mean.to_string(),
            r.cum_regret_std.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `raw.csv` and `aggregate.csv` into `dir`.
pub fn write_csv(table: &ResultsTable, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_raw_csv(&table.raw, &dir.join(RAW_FILE))?;
    write_aggregate_csv(&table.aggregate, &dir.join(AGGREGATE_FILE))
}

fn records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, HarnessError> {
    let mut r = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let found = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(HarnessError::Csv {
            path: path.to_path_buf(),
            message: format!("unexpected header {found:?}"),
        });
    }
    r.records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| csv_err(path, e))
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    path: &Path,
) -> Result<T, HarnessError> {
    rec[i].parse().map_err(|_| HarnessError::Csv {
        path: path.to_path_buf(),
        message: format!("cannot parse '{}' in column {}", &rec[i], i + 1),
    })
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<RawRow>, HarnessError> {
    records(path, &RAW_HEADER)?
        .iter()
        .map(|rec| {
            Ok(RawRow {
                policy: rec[0].to_string(),
                rep: field(rec, 1, path)?,
                t: field(rec, 2, path)?,
                inst_regret: field(rec, 3, path)?,
                cum_regret: field(rec, 4, path)?,
                est_error_l2: if rec[5].is_empty() {
                    None
                } else {
                    Some(field(rec, 5, path)?)
                },
                gram_min_eig: field(rec, 6, path)?,
            })
        })
        .collect()
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>, HarnessError> {
    records(path, &AGGREGATE_HEADER)?
        .iter()
        .map(|rec| {
            Ok(AggregateRow {
                policy: rec[0].to_string(),
                t: field(rec, 1, path)?,
                cum_regret_mean: field(rec, 2, path)?,
                cum_regret_std: field(rec, 3, path)?,
            })
        })
        .collect()
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Standalone SVG of mean cumulative regret per policy with a +-1 std band.
pub fn render_svg(aggregate: &[AggregateRow], path: &Path) -> Result<(), HarnessError> {
    let svg = svg_string(aggregate);
    std::fs::write(path, svg).map_err(io_err(path))
}

fn svg_string(aggregate: &[AggregateRow]) -> String {
    let mut names: Vec<&str> = Vec::new();
    for r in aggregate {
        if !names.contains(&r.policy.as_str()) {
            names.push(&r.policy);
        }
    }
    let t_max = aggregate.iter().map(|r| r.t).max().unwrap_or(1).max(2) as f64;
    let y_top = aggregate
        .iter()
        .map(|r| r.cum_regret_mean + r.cum_regret_std)
        .fold(0.0, f64::max);
    let y_max = if y_top > 0.0 { y_top * 1.05 } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |t: f64| LEFT + (t - 1.0) / (t_max - 1.0) * plot_w;
    let py = |y: f64| TOP + plot_h - y.clamp(0.0, y_max) / y_max * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let (x0, y0, x1) = (LEFT, TOP + plot_h, LEFT + plot_w);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/>"#
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let t = 1.0 + frac * (t_max - 1.0);
        let y = frac * y_max;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            px(t),
            y0 + 16.0,
            t.round()
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{:.3}</text>"#,
            x0 - 6.0,
            py(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">t</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 20 {:.2})">cumulative regret</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, name) in names.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let rows: Vec<&AggregateRow> = aggregate.iter().filter(|r| r.policy == *name).collect();
        let mut band = String::new();
        for (j, r) in rows.iter().enumerate() {
            let cmd = if j == 0 { 'M' } else { 'L' };
            let _ = write!(
                band,
                "{cmd}{:.2},{:.2} ",
                px(r.t as f64),
                py(r.cum_regret_mean + r.cum_regret_std)
            );
        }
        for r in rows.iter().rev() {
            let _ = write!(
                band,
                "L{:.2},{:.2} ",
                px(r.t as f64),
                py(r.cum_regret_mean - r.cum_regret_std)
            );
        }
        band.push('Z');
        let _ = writeln!(
            s,
            r#"<path class="band" d="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#
        );
        let points: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.t as f64), py(r.cum_regret_mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let ly = TOP + 20.0 + 20.0 * i as f64;
        let lx = x1 + 20.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="13">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes CSV files, the optional SVG and a sidecar holding the resolved
/// config and the diagnostics block, if any. Returns the paths written.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    results: &ExperimentResults,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    write_csv(&results.table, dir)?;
    let mut written = vec![dir.join(RAW_FILE), dir.join(AGGREGATE_FILE)];
    if cfg.emit_svg {
        let p = dir.join(SVG_FILE);
        render_svg(&results.table.aggregate, &p)?;
        written.push(p);
    }
    let mut side = String::from("# resolved experiment configuration\n[config]\n");
    let cfg_text = cfg.to_toml_string();
    side.push_str(&nest(&cfg_text, "config"));
    if let Some(report) = &results.diagnostics {
        side.push_str("\n[diagnostics]\n");
        side.push_str(&nest(&report.to_text_block(), "diagnostics"));
    }
    let p = dir.join(SIDECAR_FILE);
    let mut f = File::create(&p).map_err(io_err(&p))?;
    f.write_all(side.as_bytes()).map_err(io_err(&p))?;
    written.push(p);
    Ok(written)
}

/// Re-roots a TOML document under `prefix` by qualifying its table headers.
fn nest(text: &str, prefix: &str) -> String {
    text.lines()
        .map(|line| {
            if let Some(rest) = line.strip_prefix("[[") {
                format!("[[{prefix}.{rest}")
            } else if let Some(rest) = line.strip_prefix('[') {
                format!("[{prefix}.{rest}")
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}
