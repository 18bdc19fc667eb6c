//! Run reports, accuracy-matrix CSV and comparison tables.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::AccuracyMatrix;
use super::split::{ScenarioMode, SplitSpec};
use crate::error::Result;

pub const MATRIX_CSV_HEADER: [&str; 4] = ["after_task", "eval_set", "accuracy", "count"];

const WEIGHTING_NOTE: &str = "average_accuracy is the unweighted mean over eval sets; \
sample_weighted_accuracy weights every test sample equally; they differ because eval sets have unequal sizes";
const FORGETTING_NOTE: &str = "forgetting is reported for information only";

/// Outcome of one scenario run. Serialised as JSON with fields in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub learner: String,
    pub mode: ScenarioMode,
    pub buffer_size: u64,
    pub average_accuracy: f64,
    pub sample_weighted_accuracy: f64,
    pub forgetting: Option<f64>,
    pub fingerprint: String,
    pub notes: Vec<String>,
    /// Flat config text the run was started from, when known.
    pub config: Option<String>,
    pub split: SplitSpec,
    pub matrix: AccuracyMatrix,
}

impl RunReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        method: String,
        learner: String,
        split: SplitSpec,
        matrix: AccuracyMatrix,
        average_accuracy: f64,
        sample_weighted_accuracy: f64,
        forgetting: Option<f64>,
        fingerprint: String,
    ) -> Self {
        let mut notes = Vec::new();
        let final_counts = matrix.counts.last().cloned().unwrap_or_default();
        if final_counts.windows(2).any(|w| w[0] != w[1]) {
            notes.push(WEIGHTING_NOTE.to_string());
        }
        if forgetting.is_some() && learner == "nmc" {
            notes.push(FORGETTING_NOTE.to_string());
        }
        Self {
            method,
            learner,
            mode: split.mode,
            buffer_size: 0,
            average_accuracy,
            sample_weighted_accuracy,
            forgetting,
            fingerprint,
            notes,
            config: None,
            split,
            matrix,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// One line per populated cell with header `after_task,eval_set,accuracy,count`.
    pub fn write_matrix_csv<W: Write>(&self, sink: W) -> Result<()> {
        write_matrix_csv(&self.matrix, sink)
    }

    /// Lines printed after a run, percentages with two decimals.
    pub fn summary(&self) -> String {
        let mut out = format!("Average Acc: {}\n", percent(self.average_accuracy));
        if let Some(f) = self.forgetting {
            let _ = writeln!(out, "Forgetting: {}", percent(f));
        }
        out
    }
}

pub fn percent(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

pub fn write_matrix_csv<W: Write>(matrix: &AccuracyMatrix, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(MATRIX_CSV_HEADER)?;
    for (t, (row, counts)) in matrix.values.iter().zip(&matrix.counts).enumerate() {
        for (i, (v, c)) in row.iter().zip(counts).enumerate() {
            if let Some(v) = v {
                let count = c.map(|c| c.to_string()).unwrap_or_default();
                w.write_record([t.to_string(), i.to_string(), v.to_string(), count])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    pub buffer_size: u64,
    pub average_accuracy: f64,
    pub forgetting: Option<f64>,
}

/// Rows sorted by average accuracy, best first; equal scores keep input order.
pub fn comparison_rows(reports: &[RunReport]) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            method: r.method.clone(),
            buffer_size: r.buffer_size,
            average_accuracy: r.average_accuracy,
            forgetting: r.forgetting,
        })
        .collect();
    rows.sort_by(|a, b| b.average_accuracy.total_cmp(&a.average_accuracy));
    rows
}

const COLUMNS: [&str; 4] = ["Method", "Buffer size", "Average Acc", "Forgetting"];

fn cells(row: &ComparisonRow) -> [String; 4] {
    [
        row.method.clone(),
        row.buffer_size.to_string(),
        percent(row.average_accuracy),
        row.forgetting.map_or_else(|| "-".to_string(), percent),
    ]
}

pub fn render_comparison_table(rows: &[ComparisonRow]) -> String {
    let body: Vec<[String; 4]> = rows.iter().map(cells).collect();
    let mut widths = COLUMNS.map(str::len);
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cols: &[&str]| {
        let parts: Vec<String> = cols.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &COLUMNS);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("  "));
    for r in &body {
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["method", "buffer_size", "average_acc", "forgetting"])?;
    for r in rows {
        let [m, b, a, f] = cells(r);
        w.write_record([m, b, a, if f == "-" { String::new() } else { f }])?;
    }
    w.flush()?;
    Ok(())
}
