//! Report files: the full JSON record or one CSV row per classified set.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};
use crate::protocol::ProtocolReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub repeat: usize,
    pub set_id: String,
    pub true_label: String,
    pub predicted_label: String,
    pub decided_by_tie: bool,
    pub seconds: f64,
}

pub fn csv_rows(report: &ProtocolReport) -> Vec<CsvRow> {
    report
        .repeats
        .iter()
        .flat_map(|r| {
            r.sets.iter().map(move |s| CsvRow {
                repeat: r.repeat,
                set_id: s.set_id.clone(),
                true_label: s.true_label.clone(),
                predicted_label: s.predicted_label.clone(),
                decided_by_tie: s.decided_by_tie,
                seconds: s.seconds,
            })
        })
        .collect()
}

pub fn write_report<W: Write>(report: &ProtocolReport, format: ReportFormat, w: W) -> Result<()> {
    let err = |e: &dyn std::fmt::Display| HarnessError::Report(e.to_string());
    match format {
        ReportFormat::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, report).map_err(|e| err(&e))?;
            writeln!(w).map_err(|e| err(&e))
        }
        ReportFormat::Csv => {
            let mut wr = csv::Writer::from_writer(w);
            for row in csv_rows(report) {
                wr.serialize(row).map_err(|e| err(&e))?;
            }
            wr.flush().map_err(|e| err(&e))
        }
    }
}

pub fn emit_report(report: &ProtocolReport, format: ReportFormat, path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(HarnessError::Report("report path is empty".into()));
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_report(report, format, &mut w)?;
    w.flush().map_err(io_err(path))
}

/// Per-repeat accuracies recovered from CSV rows, in repeat order.
pub fn accuracies_from_rows(rows: &[CsvRow]) -> Vec<f64> {
    let mut acc: Vec<(usize, usize, usize)> = Vec::new();
    for row in rows {
        if acc.last().is_none_or(|(r, _, _)| *r != row.repeat) {
            acc.push((row.repeat, 0, 0));
        }
        let last = acc.last_mut().expect("pushed above");
        last.1 += usize::from(row.true_label == row.predicted_label);
        last.2 += 1;
    }
    acc.into_iter().map(|(_, ok, n)| ok as f64 / n as f64).collect()
}
