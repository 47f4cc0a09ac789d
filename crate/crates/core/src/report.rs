//! Tabular report payloads and deterministic CSV emission.

use crate::error::Result;
use serde::{Deserialize, Serialize};

/// The report kinds the pipeline emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Robustness,
    StanceCoords,
    Regression,
    Kw,
    Validity,
    AlignComparison,
    OpenEnded,
}

impl ReportKind {
    pub fn file_stem(&self) -> &'static str {
        match self {
            ReportKind::Robustness => "robustness",
            ReportKind::StanceCoords => "stance_coords",
            ReportKind::Regression => "regression",
            ReportKind::Kw => "kw",
            ReportKind::Validity => "validity",
            ReportKind::AlignComparison => "align_comparison",
            ReportKind::OpenEnded => "open_ended",
        }
    }
}

/// A tabular report; every row carries run id and config hashes so any
/// emitted file is traceable to its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: ReportKind,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(kind: ReportKind, columns: &[&str]) -> Self {
        Report {
            kind,
            header: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "report row width mismatch");
        self.rows.push(row);
    }

    /// Render to CSV, deterministically.
    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(&self.header)
            .map_err(|e| crate::error::Error::Analysis(format!("csv: {e}")))?;
        for row in &self.rows {
            writer
                .write_record(row)
                .map_err(|e| crate::error::Error::Analysis(format!("csv: {e}")))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| crate::error::Error::Analysis(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Stable float formatting for report cells.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

pub fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_emission_is_deterministic_and_quoted() {
        let mut report = Report::new(ReportKind::Kw, &["a", "b"]);
        report.push(vec!["x,with comma".to_string(), fmt_f64(0.5)]);
        let csv = report.to_csv().unwrap();
        assert_eq!(csv, "a,b\n\"x,with comma\",0.500000\n");
        assert_eq!(report.to_csv().unwrap(), csv);
    }
}
