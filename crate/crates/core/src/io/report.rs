use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{fixed, round6};
use crate::error::{io_err, Error, Result};
use crate::metrics::{
    format_delta, improvement_delta, precision_thresholds, success_thresholds, EvaluationReport, Metrics,
};

pub const REPORT_FILE: &str = "report.csv";
pub const CURVES_FILE: &str = "curves.json";
pub const ATTRIBUTES_FILE: &str = "attributes.csv";
/// `sequence` column value of per-group mean rows.
pub const AGGREGATE_ROW: &str = "ALL";

/// One line of `report.csv`. `delta_pct` is the AUC change against the baseline mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub tracker: String,
    pub mode: String,
    pub sequence: String,
    pub auc: f64,
    pub dp: f64,
    #[serde(with = "opt_num")]
    pub fps: Option<f64>,
    pub delta_pct: String,
}

mod opt_num {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_str(&super::fixed(*v)),
            None => s.serialize_str("N/A"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let s = String::deserialize(d)?;
        if s == "N/A" {
            return Ok(None);
        }
        s.parse().map(Some).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub curves: PathBuf,
    pub attributes: Option<PathBuf>,
}

fn row(report: &EvaluationReport, tracker: &str, mode: &str, sequence: &str, m: &Metrics, agg: bool) -> ReportRow {
    let base = report.baseline_auc(tracker, if agg { None } else { Some(sequence) });
    ReportRow {
        tracker: tracker.to_string(),
        mode: mode.to_string(),
        sequence: sequence.to_string(),
        auc: round6(m.auc),
        dp: round6(m.dp),
        fps: m.fps.map(round6),
        delta_pct: format_delta(base.and_then(|b| improvement_delta(b, m.auc))),
    }
}

/// Per-cell rows, then a mean row for every group spanning more than one sequence.
pub fn report_rows(report: &EvaluationReport) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = report
        .cells
        .iter()
        .map(|c| row(report, &c.tracker, &c.mode, &c.sequence, &c.metrics, false))
        .collect();
    for g in &report.groups {
        let n = report
            .cells
            .iter()
            .filter(|c| c.tracker == g.tracker && c.mode == g.mode)
            .count();
        if n > 1 {
            rows.push(row(report, &g.tracker, &g.mode, AGGREGATE_ROW, &g.aggregate, true));
        }
    }
    rows
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

fn serialize_rows<T: Serialize>(rows: &[T], headers: Option<&[&str]>) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(headers.is_none())
        .from_writer(Vec::new());
    if let Some(h) = headers {
        w.write_record(h).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn format_report_csv(report: &EvaluationReport) -> String {
    let rows = report_rows(report);
    serialize_rows(
        &rows,
        rows.is_empty()
            .then_some(&["tracker", "mode", "sequence", "auc", "dp", "fps", "delta_pct"][..]),
    )
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

fn rounded(v: &[f64]) -> Value {
    Value::from(v.iter().map(|x| round6(*x)).collect::<Vec<_>>())
}

fn curves_json(report: &EvaluationReport) -> Value {
    let entry = |tracker: &str, mode: &str, sequence: &str, m: &Metrics| {
        json!({
            "tracker": tracker,
            "mode": mode,
            "sequence": sequence,
            "precision": rounded(&m.precision),
            "success": rounded(&m.success),
            "auc": round6(m.auc),
            "dp": round6(m.dp),
        })
    };
    let mut curves: Vec<Value> = report
        .cells
        .iter()
        .map(|c| entry(&c.tracker, &c.mode, &c.sequence, &c.metrics))
        .collect();
    curves.extend(
        report
            .groups
            .iter()
            .map(|g| entry(&g.tracker, &g.mode, AGGREGATE_ROW, &g.aggregate)),
    );
    json!({
        "precision_thresholds": rounded(&precision_thresholds()),
        "success_thresholds": rounded(&success_thresholds()),
        "curves": curves,
    })
}

#[derive(Serialize)]
struct AttributeLine<'a> {
    tracker: &'a str,
    mode: &'a str,
    attribute: &'a str,
    sequences: usize,
    auc: String,
    dp: String,
}

fn attributes_csv(report: &EvaluationReport) -> Option<String> {
    let mut lines = Vec::new();
    for g in &report.groups {
        for a in &g.attributes {
            let (auc, dp) = match &a.metrics {
                Some(m) => (fixed(m.auc), fixed(m.dp)),
                None => ("empty".to_string(), "empty".to_string()),
            };
            lines.push(AttributeLine {
                tracker: &g.tracker,
                mode: &g.mode,
                attribute: &a.attribute,
                sequences: a.sequences,
                auc,
                dp,
            });
        }
    }
    (!lines.is_empty()).then(|| serialize_rows(&lines, None))
}

/// Writes `report.csv`, `curves.json` and, when any sequence carries attribute flags, `attributes.csv`.
pub fn write_report(report: &EvaluationReport, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = ReportFiles {
        report: dir.join(REPORT_FILE),
        curves: dir.join(CURVES_FILE),
        attributes: None,
    };
    std::fs::write(&files.report, format_report_csv(report)).map_err(io_err(&files.report))?;
    let curves = serde_json::to_string_pretty(&curves_json(report)).expect("json value serializes") + "\n";
    std::fs::write(&files.curves, curves).map_err(io_err(&files.curves))?;
    let attributes = match attributes_csv(report) {
        Some(text) => {
            let path = dir.join(ATTRIBUTES_FILE);
            std::fs::write(&path, text).map_err(io_err(&path))?;
            Some(path)
        }
        None => None,
    };
    Ok(ReportFiles { attributes, ..files })
}
