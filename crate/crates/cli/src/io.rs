//! CSV input with row and column diagnostics.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use confcal_core::{AuditRow, CalibrationRecord, CoverageSample, HistogramBin};

use crate::CliError;

/// Parsed table: header names plus string rows with their source line.
struct Table {
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

fn read_table(reader: impl Read, source: &str) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{source}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.iter().all(String::is_empty) {
        return Err(CliError::Input(format!("{source}: missing header row")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Input(format!("{source}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{source}: no data rows")));
    }
    Ok(Table { headers, rows })
}

impl Table {
    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str, source: &str) -> Result<usize, CliError> {
        self.column(name).ok_or_else(|| {
            CliError::Input(format!(
                "{source}: missing column `{name}` (header: {})",
                self.headers.join(",")
            ))
        })
    }

    fn unknown_columns(&self, known: &[&str]) -> Vec<String> {
        self.headers
            .iter()
            .filter(|h| !known.contains(&h.as_str()))
            .cloned()
            .collect()
    }
}

fn number(
    rec: &csv::StringRecord,
    line: u64,
    idx: usize,
    name: &str,
    source: &str,
) -> Result<f64, CliError> {
    let raw = rec.get(idx).unwrap_or("");
    let value: f64 = raw.parse().map_err(|_| {
        CliError::Input(format!(
            "{source}: line {line}, column `{name}`: cannot parse `{raw}` as a number"
        ))
    })?;
    if value.is_nan() {
        return Err(CliError::Input(format!(
            "{source}: line {line}, column `{name}`: NaN is not allowed"
        )));
    }
    Ok(value)
}

fn finite(value: f64, line: u64, name: &str, source: &str) -> Result<f64, CliError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Input(format!(
            "{source}: line {line}, column `{name}`: value must be finite"
        )))
    }
}

/// Calibration rows from a `y_true,y_pred[,u][,group]` CSV. Returns the
/// records and the names of ignored columns.
pub fn read_calibration(
    reader: impl Read,
    source: &str,
) -> Result<(Vec<CalibrationRecord>, Vec<String>), CliError> {
    let table = read_table(reader, source)?;
    let yt = table.require("y_true", source)?;
    let yp = table.require("y_pred", source)?;
    let u = table.column("u");
    let group = table.column("group");
    let mut records = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let y_true = finite(
            number(rec, *line, yt, "y_true", source)?,
            *line,
            "y_true",
            source,
        )?;
        let y_pred = finite(
            number(rec, *line, yp, "y_pred", source)?,
            *line,
            "y_pred",
            source,
        )?;
        let half = match u {
            Some(i) if !rec.get(i).unwrap_or("").is_empty() => {
                let v = finite(number(rec, *line, i, "u", source)?, *line, "u", source)?;
                if v < 0.0 {
                    return Err(CliError::Input(format!(
                        "{source}: line {line}, column `u`: half-width must be non-negative"
                    )));
                }
                v
            }
            _ => 0.0,
        };
        let mut record = CalibrationRecord::new(y_true, y_pred, half);
        if let Some(g) = group.and_then(|i| rec.get(i)).filter(|g| !g.is_empty()) {
            record = record.with_group(g);
        }
        records.push(record);
    }
    Ok((
        records,
        table.unknown_columns(&["y_true", "y_pred", "u", "group"]),
    ))
}

/// Audit rows from a `y_true,lo,hi` CSV. Bounds may be `inf` / `-inf`.
pub fn read_audit(
    reader: impl Read,
    source: &str,
) -> Result<(Vec<AuditRow>, Vec<String>), CliError> {
    let table = read_table(reader, source)?;
    let yt = table.require("y_true", source)?;
    let lo = table.require("lo", source)?;
    let hi = table.require("hi", source)?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let y_true = finite(
            number(rec, *line, yt, "y_true", source)?,
            *line,
            "y_true",
            source,
        )?;
        let l = number(rec, *line, lo, "lo", source)?;
        let h = number(rec, *line, hi, "hi", source)?;
        if l > h {
            return Err(CliError::Input(format!(
                "{source}: line {line}: lower bound {l} exceeds upper bound {h}"
            )));
        }
        rows.push(AuditRow::new(y_true, l, h));
    }
    Ok((rows, table.unknown_columns(&["y_true", "lo", "hi"])))
}

pub fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file =
        File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(csv::Writer::from_writer(file))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

pub fn write_histogram(path: &Path, bins: &[HistogramBin]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["bin_low", "bin_high", "count"])
        .map_err(|e| io_err(path, e))?;
    for b in bins {
        w.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string()])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_samples(path: &Path, sample: &CoverageSample) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(["realization", "coverage", "correction"])
        .map_err(|e| io_err(path, e))?;
    for (i, (c, q)) in sample.coverages.iter().zip(&sample.corrections).enumerate() {
        w.write_record([i.to_string(), c.to_string(), q.to_string()])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
