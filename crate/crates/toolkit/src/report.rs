//! JSON and CSV report writers.
//!
//! JSON is one document with keys in sorted order. Every measured number is
//! rounded to six decimals; the config echo keeps its values exactly.
//!
//! CSV has the fixed header [`CSV_HEADER`], one row per run, then a `mean`
//! and a `std` row over the successful runs. Fields a scenario does not
//! define are left empty.

use std::path::Path;

use duck_core::data::ForgetSpec;
use duck_core::metrics::{AccuracyVector, Summary};
use duck_core::mia::MiaResult;
use serde_json::{json, Map, Value};

use crate::config::ReportFormat;
use crate::experiment::{Aggregate, ExperimentReport, RunMetrics};
use crate::{Error, Result};

pub const DECIMALS: i32 = 6;

pub const CSV_HEADER: [&str; 18] = [
    "row",
    "seed",
    "forget",
    "status",
    "a_r",
    "a_f",
    "a_t_r",
    "a_t_f",
    "a_t",
    "a_or_t",
    "aus",
    "aus_delta",
    "mia_f1",
    "epochs_run",
    "converged",
    "degenerate",
    "wall_time_seconds",
    "error",
];

/// `v` rounded half away from zero to [`DECIMALS`] places.
pub fn round(v: f64) -> f64 {
    let scale = 10f64.powi(DECIMALS);
    (v * scale).round() / scale
}

fn num(v: f64) -> Value {
    json!(round(v))
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

fn accuracies(a: &AccuracyVector) -> Value {
    json!({
        "a_r": num(a.a_r),
        "a_f": num(a.a_f),
        "a_t_r": opt(a.a_t_r),
        "a_t_f": opt(a.a_t_f),
        "a_t": opt(a.a_t),
        "a_or_t": num(a.a_or_t),
    })
}

fn mia(m: &MiaResult) -> Value {
    json!({
        "mean_f1": num(m.mean_f1),
        "runs": m.runs.iter().map(|r| json!({
            "seed": r.seed,
            "c": r.c,
            "gamma": r.gamma,
            "f1": num(r.f1),
            "converged": r.converged,
        })).collect::<Vec<_>>(),
    })
}

fn metrics(m: &RunMetrics) -> Value {
    json!({
        "accuracies": accuracies(&m.accuracies),
        "aus": num(m.aus.value),
        "aus_delta": num(m.aus.delta),
        "mia": m.mia.as_ref().map_or(Value::Null, mia),
        "epochs_run": m.epochs_run,
        "converged": m.converged,
        "degenerate": m.degenerate,
        "wall_time_seconds": num(m.wall_time_seconds),
    })
}

fn summary(s: &Summary) -> Value {
    json!({ "mean": num(s.mean), "std": opt(s.std) })
}

fn aggregate(a: &Aggregate) -> Value {
    let acc = &a.accuracies;
    let o = |s: &Option<Summary>| s.as_ref().map_or(Value::Null, summary);
    json!({
        "runs_ok": a.runs_ok,
        "runs_failed": a.runs_failed,
        "a_r": summary(&acc.a_r),
        "a_f": summary(&acc.a_f),
        "a_t_r": o(&acc.a_t_r),
        "a_t_f": o(&acc.a_t_f),
        "a_t": o(&acc.a_t),
        "aus": summary(&acc.aus),
        "mia_f1": o(&a.mia_f1),
        "wall_time_seconds": summary(&a.wall_time_seconds),
    })
}

fn forget_value(f: &ForgetSpec) -> Value {
    match f {
        ForgetSpec::Classes(c) => json!({ "classes": c }),
        ForgetSpec::Fraction(x) => json!({ "fraction": x }),
    }
}

fn ensure_runs(report: &ExperimentReport) -> Result<()> {
    if report.runs.is_empty() {
        return Err(Error::Report("a report needs at least one run".into()));
    }
    Ok(())
}

pub fn to_json_value(report: &ExperimentReport) -> Result<Value> {
    ensure_runs(report)?;
    let runs: Vec<Value> = report
        .runs
        .iter()
        .map(|r| {
            let mut m = Map::new();
            m.insert("index".into(), json!(r.index));
            m.insert("seed".into(), json!(r.seed));
            m.insert("forget".into(), forget_value(&r.forget));
            match &r.result {
                Ok(metrics_) => {
                    m.insert("status".into(), json!("ok"));
                    m.insert("metrics".into(), metrics(metrics_));
                }
                Err(e) => {
                    m.insert("status".into(), json!("failed"));
                    m.insert("error".into(), json!(e));
                }
            }
            Value::Object(m)
        })
        .collect();
    let config = serde_json::to_value(&report.config).map_err(|e| Error::Report(e.to_string()))?;
    Ok(json!({
        "toolkit_version": report.toolkit_version,
        "stage": report.stage.as_str(),
        "method": report.method.map(|m| m.as_str()),
        "scenario": report.scenario.as_str(),
        "config": config,
        "original": {
            "train_accuracy": num(report.original_train_accuracy),
            "test_accuracy": num(report.original_test_accuracy),
        },
        "runs": runs,
        "aggregate": report.aggregate.as_ref().map_or(Value::Null, aggregate),
    }))
}

pub fn to_json(report: &ExperimentReport) -> Result<String> {
    let v = to_json_value(report)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Report(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| round(x).to_string()).unwrap_or_default()
}

fn forget_cell(f: &ForgetSpec) -> String {
    f.describe()
}

pub fn to_csv(report: &ExperimentReport) -> Result<String> {
    ensure_runs(report)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in &report.runs {
        let mut row = vec![r.index.to_string(), r.seed.to_string(), forget_cell(&r.forget)];
        match &r.result {
            Ok(m) => {
                let a = &m.accuracies;
                row.extend([
                    "ok".to_string(),
                    cell(Some(a.a_r)),
                    cell(Some(a.a_f)),
                    cell(a.a_t_r),
                    cell(a.a_t_f),
                    cell(a.a_t),
                    cell(Some(a.a_or_t)),
                    cell(Some(m.aus.value)),
                    cell(Some(m.aus.delta)),
                    cell(m.mia.as_ref().map(|x| x.mean_f1)),
                    m.epochs_run.map(|e| e.to_string()).unwrap_or_default(),
                    m.converged.map(|c| c.to_string()).unwrap_or_default(),
                    m.degenerate.to_string(),
                    cell(Some(m.wall_time_seconds)),
                    String::new(),
                ]);
            }
            Err(e) => {
                row.push("failed".into());
                row.extend(std::iter::repeat_n(String::new(), 13));
                row.push(e.clone());
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    for (label, pick) in [
        ("mean", (|s: &Summary| Some(s.mean)) as fn(&Summary) -> Option<f64>),
        ("std", |s: &Summary| s.std),
    ] {
        let mut row = vec![label.to_string(), String::new(), String::new()];
        match &report.aggregate {
            Some(agg) => {
                let acc = &agg.accuracies;
                let o = |s: &Option<Summary>| cell(s.as_ref().and_then(pick));
                row.extend([
                    format!("{} ok", agg.runs_ok),
                    cell(pick(&acc.a_r)),
                    cell(pick(&acc.a_f)),
                    o(&acc.a_t_r),
                    o(&acc.a_t_f),
                    o(&acc.a_t),
                    String::new(),
                    cell(pick(&acc.aus)),
                    String::new(),
                    o(&agg.mia_f1),
                    String::new(),
                    String::new(),
                    String::new(),
                    cell(pick(&agg.wall_time_seconds)),
                    String::new(),
                ]);
            }
            None => {
                row.push("0 ok".into());
                row.extend(std::iter::repeat_n(String::new(), 14));
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

pub fn render(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => to_csv(report),
    }
}

/// Writes the report to `out`, or returns it for stdout when `out` is `None`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, out: Option<&Path>) -> Result<Option<String>> {
    let text = render(report, format)?;
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                    path: dir.display().to_string(),
                    source,
                })?;
            }
            std::fs::write(path, text).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round(0.123_456_49), 0.123456);
        assert_eq!(round(0.123_456_5), 0.123457);
        assert_eq!(round(1.0), 1.0);
    }
}
