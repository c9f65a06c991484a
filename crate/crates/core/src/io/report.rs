//! Evaluation reports: JSON with full detail, CSV with one row per page plus
//! an aggregate row, and a plain-text table for terminals.
//!
//! Everything except the `timestamp` field is a pure function of the
//! [`CorpusResult`], so re-running the same inputs gives identical bytes
//! once the timestamp is fixed.

use std::path::Path;

use serde::Serialize;

use super::write_bytes;
use crate::corpus::{AggregateRow, CorpusResult, PageResult, RunConfig, SpearmanOutcome};
use crate::error::Result;

/// Image id used for the aggregate row of the CSV report.
pub const AGGREGATE_ROW_ID: &str = "__aggregate__";

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 14] = [
    "image_id",
    "cote",
    "coverage",
    "overlap",
    "trespass",
    "excess",
    "iou",
    "map",
    "f1",
    "precision",
    "recall",
    "n_ssus",
    "n_predictions",
    "excess_defined",
];

const ROUNDING_NOTE: &str =
    "box edges rounded to the nearest pixel (halves away from zero); polygons filled at pixel centres, even-odd rule";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?} (expected json or csv)")),
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    timestamp: &'a str,
    aggregation: &'static str,
    rasterization: &'static str,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    metadata: Metadata<'a>,
    aggregate: &'a AggregateRow,
    spearman_iou_cote: &'a SpearmanOutcome,
    pages: &'a [PageResult],
    warnings: &'a [String],
}

/// Current UTC time as RFC 3339 with seconds precision.
pub fn now_timestamp() -> String {
    humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string()
}

fn metadata<'a>(result: &'a CorpusResult, timestamp: &'a str) -> Metadata<'a> {
    Metadata {
        tool: "cote",
        version: env!("CARGO_PKG_VERSION"),
        timestamp,
        aggregation: "macro-mean over pages with non-empty ground truth",
        rasterization: ROUNDING_NOTE,
        config: &result.config,
    }
}

pub fn render_json(result: &CorpusResult, timestamp: &str) -> String {
    let report = JsonReport {
        metadata: metadata(result, timestamp),
        aggregate: &result.aggregate,
        spearman_iou_cote: &result.spearman_iou_cote,
        pages: &result.pages,
        warnings: &result.warnings,
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn page_row(p: &PageResult) -> Vec<String> {
    let c = &p.cote;
    vec![
        p.image_id.clone(),
        c.cote.to_string(),
        c.coverage.to_string(),
        c.overlap.to_string(),
        c.trespass.to_string(),
        c.excess.to_string(),
        opt(p.mean_iou),
        opt(p.ap.as_ref().map(|a| a.map)),
        opt(p.f1.as_ref().map(|f| f.f1)),
        opt(p.f1.as_ref().map(|f| f.precision)),
        opt(p.f1.as_ref().map(|f| f.recall)),
        p.n_ssus.to_string(),
        p.n_predictions.to_string(),
        c.excess_defined.to_string(),
    ]
}

fn aggregate_row(a: &AggregateRow) -> Vec<String> {
    let mut row = vec![
        AGGREGATE_ROW_ID.to_string(),
        a.cote.to_string(),
        a.coverage.to_string(),
        a.overlap.to_string(),
        a.trespass.to_string(),
        a.excess.to_string(),
        opt(a.mean_iou),
        opt(a.map),
        opt(a.f1),
    ];
    row.resize(CSV_COLUMNS.len(), String::new());
    row
}

/// CSV with `#`-prefixed metadata lines before the header.
pub fn render_csv(result: &CorpusResult, timestamp: &str) -> String {
    let meta = serde_json::to_string(&metadata(result, timestamp)).expect("metadata serializes");
    let mut out = format!("# {meta}\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for p in &result.pages {
        w.write_record(page_row(p)).expect("in-memory write");
    }
    w.write_record(aggregate_row(&result.aggregate))
        .expect("in-memory write");
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
    out
}

pub fn render_report(result: &CorpusResult, format: ReportFormat, timestamp: &str) -> String {
    match format {
        ReportFormat::Json => render_json(result, timestamp),
        ReportFormat::Csv => render_csv(result, timestamp),
    }
}

pub fn write_report(result: &CorpusResult, format: ReportFormat, path: &Path) -> Result<()> {
    write_bytes(path, render_report(result, format, &now_timestamp()).as_bytes())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

/// Two-decimal summary table, one line per page and a final aggregate line.
pub fn format_table(result: &CorpusResult) -> String {
    let width = result
        .pages
        .iter()
        .map(|p| p.image_id.len())
        .chain([9])
        .max()
        .unwrap_or(9);
    let mut out = format!(
        "{:<width$}  {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
        "image", "COTe", "C", "O", "T", "E", "IoU", "mAP", "F1"
    );
    let mut line = |id: &str, vals: [Option<f64>; 8]| {
        out.push_str(&format!("{id:<width$} "));
        for v in vals {
            out.push_str(&format!(" {:>6}", cell(v)));
        }
        out.push('\n');
    };
    for p in &result.pages {
        let c = &p.cote;
        line(
            &p.image_id,
            [
                Some(c.cote),
                Some(c.coverage),
                Some(c.overlap),
                Some(c.trespass),
                Some(c.excess),
                p.mean_iou,
                p.ap.as_ref().map(|a| a.map),
                p.f1.as_ref().map(|f| f.f1),
            ],
        );
    }
    let a = &result.aggregate;
    line(
        "aggregate",
        [
            Some(a.cote),
            Some(a.coverage),
            Some(a.overlap),
            Some(a.trespass),
            Some(a.excess),
            a.mean_iou,
            a.map,
            a.f1,
        ],
    );
    out
}
