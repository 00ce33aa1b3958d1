//! Headerless numeric CSV in, fixed-precision CSV and JSON out.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Reads a headerless numeric CSV into rows. Every row must have the same
/// number of finite values; errors name the offending line.
pub fn read_rows(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let shown = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Invalid(format!("{shown}: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Invalid(format!("{shown}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::Invalid(format!(
                    "{shown}: line {line}, column {}: '{field}' is not a number",
                    col + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Invalid(format!(
                    "{shown}: line {line}, column {}: value must be finite",
                    col + 1
                )));
            }
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::Invalid(format!(
                    "{shown}: line {line}: expected {} values, found {}",
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Invalid(format!("{shown}: no data")));
    }
    Ok(rows)
}

/// A single column or a single row, flattened.
pub fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let rows = read_rows(path)?;
    if rows.len() == 1 {
        Ok(rows.into_iter().next().unwrap_or_default())
    } else if rows[0].len() == 1 {
        Ok(rows.into_iter().map(|r| r[0]).collect())
    } else {
        Err(CliError::Invalid(format!(
            "{}: expected a single row or column, found {} x {}",
            path.display(),
            rows.len(),
            rows[0].len()
        )))
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| write_error(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| write_error(path, e))
}

pub fn write_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Invalid(format!("cannot write {}: {e}", path.display()))
}

/// Writes `lines` (already joined with commas) under `header`.
pub fn write_csv<I>(path: &Path, header: &str, lines: I) -> CliResult<()>
where
    I: IntoIterator<Item = String>,
{
    let mut w = create(path)?;
    let body = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for line in lines {
            writeln!(w, "{line}")?;
        }
        w.flush()
    };
    body().map_err(|e| write_error(path, e))
}

/// Headerless matrix with one line per row.
pub fn write_matrix(path: &Path, rows: impl IntoIterator<Item = Vec<f64>>) -> CliResult<()> {
    let mut w = create(path)?;
    let body = || -> std::io::Result<()> {
        for row in rows {
            let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    };
    body().map_err(|e| write_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| write_error(path, e))
}
