use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::order::escape;
use super::{Control, EvalError, SweepPoint, SweepResult};
use crate::acquisition::Cost;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Csv,
    Json,
    Plot,
}

/// 17 significant digits, enough to recover every `f64` exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn parse_f64(s: &str) -> Result<f64, EvalError> {
    s.trim().parse().map_err(|_| EvalError::Malformed(format!("bad number {s:?}")))
}

const HEADER: [&str; 10] = [
    "strategy",
    "task",
    "seed",
    "control_kind",
    "control",
    "mean_cost",
    "total_cost",
    "accuracy",
    "n_episodes",
    "class_recall",
];

pub fn sweep_csv_string(results: &[SweepResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in results {
        for p in &r.points {
            let control = match p.control {
                Control::Budget(b) => b.to_string(),
                Control::Unlimited => String::new(),
                Control::Lambda(l) => fmt_f64(l),
            };
            let recall = p
                .class_recall
                .iter()
                .map(|v| v.map_or(String::new(), fmt_f64))
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                r.strategy.clone(),
                r.task.clone(),
                r.seed.to_string(),
                p.control.kind().to_string(),
                control,
                fmt_f64(p.mean_cost),
                p.total_cost.to_string(),
                fmt_f64(p.accuracy),
                p.n_episodes.to_string(),
                recall,
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn write_sweep_csv(path: &Path, results: &[SweepResult]) -> Result<(), EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    fs::write(path, sweep_csv_string(results))?;
    Ok(())
}

/// Reads sweep rows back; consecutive rows with the same strategy, task and
/// seed form one result.
pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepResult>, EvalError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().collect::<Vec<_>>() != HEADER {
        return Err(EvalError::Malformed("unexpected sweep header".into()));
    }
    let mut out: Vec<SweepResult> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let cost = |s: &str| s.parse::<Cost>().map_err(|e| EvalError::Malformed(e.to_string()));
        let control = match &rec[3] {
            "budget" => Control::Budget(cost(&rec[4])?),
            "unlimited" => Control::Unlimited,
            "lambda" => Control::Lambda(parse_f64(&rec[4])?),
            other => return Err(EvalError::Malformed(format!("unknown control {other:?}"))),
        };
        let class_recall = if rec[9].is_empty() {
            Vec::new()
        } else {
            rec[9]
                .split(';')
                .map(|s| if s.is_empty() { Ok(None) } else { parse_f64(s).map(Some) })
                .collect::<Result<_, _>>()?
        };
        let point = SweepPoint {
            control,
            mean_cost: parse_f64(&rec[5])?,
            total_cost: cost(&rec[6])?,
            accuracy: parse_f64(&rec[7])?,
            n_episodes: rec[8].parse().map_err(|_| EvalError::Malformed(format!("bad count {:?}", &rec[8])))?,
            class_recall,
        };
        let seed: u64 = rec[2].parse().map_err(|_| EvalError::Malformed(format!("bad seed {:?}", &rec[2])))?;
        match out.last_mut() {
            Some(last) if last.strategy == rec[0] && last.task == rec[1] && last.seed == seed => last.points.push(point),
            _ => out.push(SweepResult { strategy: rec[0].into(), task: rec[1].into(), seed, points: vec![point] }),
        }
    }
    Ok(out)
}

pub fn read_sweep_json(text: &str) -> Result<Vec<SweepResult>, EvalError> {
    Ok(serde_json::from_str(text)?)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Accuracy-versus-cost chart with one named polyline per result.
pub fn curve_svg(results: &[SweepResult]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let max_cost = results
        .iter()
        .flat_map(|r| r.points.iter().map(|p| p.mean_cost))
        .fold(0.0, f64::max)
        .max(1e-9);
    let x = |c: f64| m + (w - 2.0 * m) * c / max_cost;
    let y = |a: f64| h - m - (h - 2.0 * m) * a;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
    for k in 0..=5 {
        let a = k as f64 / 5.0;
        let c = max_cost * a;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{a:.1}</text>"#, m - 6.0, y(a) + 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{c:.2}</text>"#, x(c), h - m + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">mean acquisition cost</text>"#, w / 2.0, h - 16.0);
    let _ = writeln!(s, r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">accuracy</text>"#, h / 2.0);
    let multi_task = results.iter().any(|r| r.task != results[0].task);
    for (i, r) in results.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let name = if multi_task { format!("{} ({})", r.strategy, r.task) } else { r.strategy.clone() };
        let pts: Vec<String> =
            r.points.iter().map(|p| format!("{:.2},{:.2}", x(p.mean_cost), y(p.accuracy))).collect();
        let _ = writeln!(s, r#"<g class="series" data-name="{}">"#, escape(&name));
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        for p in &pts {
            let (px, py) = p.split_once(',').expect("pair");
            let _ = writeln!(s, r#"<circle cx="{px}" cy="{py}" r="3" fill="{color}"/>"#);
        }
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, w - m - 120.0, escape(&name));
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the requested formats into `dir` and returns the created paths.
/// Nothing is written for an empty result list.
pub fn export(results: &[SweepResult], dir: &Path, formats: &[ExportFormat]) -> Result<Vec<PathBuf>, EvalError> {
    if results.is_empty() || results.iter().all(|r| r.points.is_empty()) {
        return Err(EvalError::EmptyResults);
    }
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for f in formats {
        let (name, body) = match f {
            ExportFormat::Csv => ("sweep.csv", sweep_csv_string(results)),
            ExportFormat::Json => {
                let mut j = serde_json::to_string_pretty(results)?;
                j.push('\n');
                ("sweep.json", j)
            }
            ExportFormat::Plot => ("curve.svg", curve_svg(results)),
        };
        let path = dir.join(name);
        fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}
