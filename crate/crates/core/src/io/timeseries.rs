//! CSV time series: a header with [`DiagnosticsRecord::COLUMNS`], then one row
//! per recorded step. Floats use the shortest representation that parses back
//! to the same bits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};

pub struct SeriesWriter {
    out: BufWriter<File>,
}

pub fn header() -> String {
    DiagnosticsRecord::COLUMNS.join(",")
}

pub fn format_row(r: &DiagnosticsRecord) -> String {
    r.values()
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

impl SeriesWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header())?;
        Ok(SeriesWriter { out })
    }

    pub fn append(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", format_row(r))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn parse_series(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::TimeSeries("empty file".into()))?;
    if head.trim() != header() {
        return Err(Error::TimeSeries("header does not match the expected columns".into()));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| Error::TimeSeries(format!("line {}: {e}", k + 2)))?;
        let rec = DiagnosticsRecord::from_values(&vals).ok_or_else(|| {
            Error::TimeSeries(format!(
                "line {}: {} columns, expected {}",
                k + 2,
                vals.len(),
                DiagnosticsRecord::COLUMNS.len()
            ))
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    parse_series(&std::fs::read_to_string(path)?)
}
