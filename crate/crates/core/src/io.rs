//! Comma-separated numeric data files: one observation per row, no header
//! unless requested.

use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn reader(path: &Path, header: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

/// Reads an `n × m` matrix. Every row must have the same number of columns.
pub fn read_matrix(path: &Path, header: bool) -> Result<DMatrix<f64>> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, record) in reader(path, header)?.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse(format!("row {} has {} columns, expected {w}", i + 1, record.len())));
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: {field:?} is not a number", i + 1)))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("row {}: non-finite value {field:?}", i + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::Parse(format!("{} contains no data", path.display())))?;
    Ok(DMatrix::from_row_slice(rows, width, &values))
}

/// Reads a single column of values.
pub fn read_column(path: &Path, header: bool) -> Result<Vec<f64>> {
    let m = read_matrix(path, header)?;
    if m.ncols() != 1 {
        return Err(Error::Parse(format!("expected one column, found {}", m.ncols())));
    }
    Ok(m.column(0).iter().copied().collect())
}

/// Reads cluster labels, one positive integer per row.
pub fn read_labels(path: &Path, header: bool) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (i, record) in reader(path, header)?.records().enumerate() {
        let record = record?;
        if record.len() != 1 {
            return Err(Error::Parse(format!("label row {} has {} columns", i + 1, record.len())));
        }
        let label = record[0]
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("label row {}: {:?} is not a positive integer", i + 1, &record[0])))?;
        labels.push(label);
    }
    Ok(labels)
}
