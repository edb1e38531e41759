//! CSV helpers shared by the solvers and the command-line driver.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Shortest round-tripping decimal, switching to exponent form for very
/// small or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn write_rows<W, I>(out: W, header: &[String], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(out);
    if !header.is_empty() {
        w.write_record(header)?;
    }
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes a matrix as header-less comma-separated rows.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let rows = m
        .row_iter()
        .map(|r| r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>());
    write_rows(create(path)?, &[], rows)
}

/// Reads a header-less numeric CSV into a matrix.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::Config(format!("{}: row {}: '{s}' is not a number", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Config(format!(
                    "{}: row {} has {} columns, expected {c}",
                    path.display(),
                    i + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
    }
    let cols = cols.ok_or_else(|| Error::Config(format!("{}: empty matrix", path.display())))?;
    Ok(DMatrix::from_row_slice(data.len() / cols, cols, &data))
}
