//! CSV matrices and JSON artifacts.
//!
//! Matrices are headerless, comma-separated, one row per line. Values are
//! written with the shortest representation that parses back to the same
//! `f64`, so a store/load cycle is bit-exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{AfssenError, Result};

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path)?;
    parse_matrix(file, path)
}

fn parse_matrix<R: std::io::Read>(reader: R, path: &Path) -> Result<DMatrix<f64>> {
    let shown = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| AfssenError::Parse {
            path: shown.clone(),
            row,
            column: 0,
            message: e.to_string(),
        })?;
        // blank lines are skipped by the reader; a lone empty field is one too
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(AfssenError::Parse {
                path: shown,
                row,
                column: record.len().min(expected),
                message: format!("row has {} columns, expected {expected}", record.len()),
            });
        }
        for (column, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| AfssenError::Parse {
                path: shown.clone(),
                row,
                column,
                message: format!("not a number: {cell:?}"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(AfssenError::Parse {
            path: shown,
            row: 0,
            column: 0,
            message: "empty file".into(),
        });
    };
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn store_matrix(path: &Path, mat: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in 0..mat.nrows() {
        let line: Vec<String> = mat.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// A single column of values, one per line.
pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let mat = load_matrix(path)?;
    if mat.ncols() != 1 && mat.nrows() != 1 {
        return Err(AfssenError::Format {
            path: path.display().to_string(),
            message: format!("expected a vector, found {}×{}", mat.nrows(), mat.ncols()),
        });
    }
    Ok(mat.iter().copied().collect())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| AfssenError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
