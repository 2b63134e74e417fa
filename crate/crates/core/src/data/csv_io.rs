use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Writes `ds` with header `f0,...,f{d-1},label`.
pub fn write_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (row, label) in ds.rows() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a dataset written by [`write_csv`]. The class count is
/// `max(label) + 1` unless given explicitly.
pub fn read_csv(path: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let dim = headers.len().saturating_sub(1);
    let expected = (0..dim).map(|j| format!("f{j}")).chain(std::iter::once("label".to_string()));
    if dim == 0 || !headers.iter().eq(expected) {
        return Err(format_error(path, "header must be f0,...,f{d-1},label"));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        for field in rec.iter().take(dim) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format_error(path, format!("row {}: bad feature {field:?}", line + 1)))?;
            features.push(v);
        }
        let label = rec.get(dim).unwrap_or_default();
        labels.push(
            label
                .trim()
                .parse::<usize>()
                .map_err(|_| format_error(path, format!("row {}: bad label {label:?}", line + 1)))?,
        );
    }
    let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    Dataset::new(features, labels, dim, classes).map_err(|e| format_error(path, e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        format_error(path, e.to_string())
    }
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}
