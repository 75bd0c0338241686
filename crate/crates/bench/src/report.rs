//! Report emission: summary CSV, markdown table, SVG curves and per-seed
//! traces.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::runner::{ExperimentOutput, RunReport};

/// One summary CSV row. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub algorithm: String,
    /// Seeds that contributed to the mean.
    pub seeds: usize,
    pub mean_loss: f64,
    pub std_loss: f64,
    /// Mean loss of the baseline, if one ran.
    pub baseline: Option<f64>,
    pub relative_decrease: Option<f64>,
    pub queries_per_round: f64,
    pub horizon: usize,
}

pub const CSV_COLUMNS: [&str; 9] = [
    "dataset",
    "algorithm",
    "seeds",
    "mean_loss",
    "std_loss",
    "baseline",
    "relative_decrease",
    "queries_per_round",
    "horizon",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Md,
    Svg,
}

impl From<&RunReport> for ReportRow {
    fn from(r: &RunReport) -> Self {
        ReportRow {
            dataset: r.dataset.clone(),
            algorithm: r.algorithm.name().to_owned(),
            seeds: r.surviving_count(),
            mean_loss: r.mean_loss,
            std_loss: r.std_loss,
            baseline: r.baseline.map(|(_, m)| m),
            relative_decrease: r.relative_decrease,
            queries_per_round: r.queries_per_round,
            horizon: r.horizon,
        }
    }
}

pub fn rows(output: &ExperimentOutput) -> Vec<ReportRow> {
    output.reports.iter().map(ReportRow::from).collect()
}

pub fn to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    anyhow::ensure!(
        headers.iter().eq(CSV_COLUMNS),
        "unexpected report columns {:?}",
        headers
    );
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn cell(mean: f64, std: f64) -> String {
    format!("{mean:.4} ± {std:.4}")
}

/// Table with columns Dataset | Baseline | Boosting | Relative Decrease.
pub fn to_markdown(outputs: &[ExperimentOutput]) -> String {
    let mut s = String::from("| Dataset | Baseline | Boosting | Relative Decrease |\n|---|---|---|---|\n");
    for out in outputs {
        let m = out.method();
        let (base, dec) = match out.baseline() {
            Some(b) => (
                format!("{} ({})", cell(b.mean_loss, b.std_loss), b.algorithm),
                m.relative_decrease
                    .map_or("n/a".into(), |d| format!("{:.2}%", 100.0 * d)),
            ),
            None => ("n/a".into(), "n/a".into()),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} ({}) | {} |",
            m.dataset,
            base,
            cell(m.mean_loss, m.std_loss),
            m.algorithm,
            dec
        );
    }
    s
}

/// Seed-averaged cumulative average loss after each round.
pub fn mean_curve(report: &RunReport) -> Vec<f64> {
    let runs: Vec<&[f64]> = report.survivors().map(|(_, s)| s.run.losses.as_slice()).collect();
    let Some(t) = runs.iter().map(|r| r.len()).min() else {
        return Vec::new();
    };
    let mut curve = vec![0.0; t];
    for r in &runs {
        let mut acc = 0.0;
        for (i, v) in r[..t].iter().enumerate() {
            acc += v;
            curve[i] += acc / (i + 1) as f64;
        }
    }
    curve.iter_mut().for_each(|c| *c /= runs.len() as f64);
    curve
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal line chart of [`mean_curve`] per algorithm.
pub fn to_svg(output: &ExperimentOutput) -> String {
    let (w, h, pad) = (720.0, 420.0, 60.0);
    let curves: Vec<(String, Vec<f64>)> = output
        .reports
        .iter()
        .map(|r| (r.algorithm.name().to_owned(), mean_curve(r)))
        .collect();
    let t_max = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(1).max(2);
    let y_max = curves
        .iter()
        .flat_map(|(_, c)| c.iter().skip(c.len() / 20))
        .cloned()
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max)
        .max(1e-12);
    let sx = |i: usize| pad + (w - 2.0 * pad) * i as f64 / (t_max - 1) as f64;
    let sy = |v: f64| h - pad - (h - 2.0 * pad) * (v / y_max).clamp(0.0, 1.0);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{y0} H{x1}" fill="none" stroke="black"/>"#,
        y0 = h - pad,
        x1 = w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">round</text>"#,
        x = w / 2.0,
        y = h - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{y}" font-size="12" transform="rotate(-90 15 {y})" text-anchor="middle">cumulative average loss</text>"#,
        y = h / 2.0
    );
    let _ = writeln!(s, r#"<text x="{x}" y="{y}" font-size="10" text-anchor="end">{y_max:.3}</text>"#, x = pad - 4.0, y = pad + 4.0);
    let _ = writeln!(s, r#"<text x="{x}" y="{y}" font-size="10" text-anchor="end">0</text>"#, x = pad - 4.0, y = h - pad);
    let _ = writeln!(s, r#"<text x="{x}" y="{y}" font-size="10" text-anchor="end">{t_max}</text>"#, x = w - pad, y = h - pad + 14.0);
    for (k, (name, curve)) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let stride = (curve.len() / 500).max(1);
        let mut points = String::new();
        for i in (0..curve.len()).step_by(stride).chain(curve.len().checked_sub(1)) {
            if curve[i].is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", sx(i), sy(curve[i]));
            }
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.trim_end());
        let ly = pad + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{ly}" font-size="12" fill="{color}" text-anchor="end">{name}</text>"#,
            x = w - pad
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Per-round trace of one seed. Projection-free runs get
/// `round,loss,cumulative_regret`; supervised runs get
/// `round,feedback_value,cumulative`.
pub fn trace_csv(report: &RunReport, seed: u64) -> Option<String> {
    let (_, s) = report.survivors().find(|(k, _)| *k == seed)?;
    let run = &s.run;
    let mut out = String::new();
    let mut acc = 0.0;
    if report.algorithm.is_supervised() {
        out.push_str("round,feedback_value,cumulative\n");
        for (t, v) in run.feedback.iter().enumerate() {
            acc += v;
            let _ = writeln!(out, "{},{},{}", t + 1, v, acc);
        }
    } else {
        out.push_str("round,loss,cumulative_regret\n");
        for (t, v) in run.losses.iter().enumerate() {
            match &run.comparator {
                Some(c) => {
                    acc += v - c.per_round[t];
                    let _ = writeln!(out, "{},{},{}", t + 1, v, acc);
                }
                None => {
                    let _ = writeln!(out, "{},{},", t + 1, v);
                }
            }
        }
    }
    Some(out)
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Writes the requested formats plus per-seed traces into `dir`.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join("traces")).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for f in formats {
        written.push(match f {
            Format::Csv => write(dir.join("report.csv"), &to_csv(&rows(output))?)?,
            Format::Md => write(dir.join("report.md"), &to_markdown(std::slice::from_ref(output)))?,
            Format::Svg => write(dir.join("curves.svg"), &to_svg(output))?,
        });
    }
    for r in &output.reports {
        for (seed, _) in r.survivors() {
            if let Some(text) = trace_csv(r, seed) {
                let name = format!("{}_seed{seed}.csv", r.algorithm.name());
                written.push(write(dir.join("traces").join(name), &text)?);
            }
        }
    }
    Ok(written)
}
