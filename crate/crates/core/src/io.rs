//! CSV ingestion and artifact emission. All inputs are UTF-8 CSV with a
//! header row and '.' decimal separators; every cell must parse as a
//! finite number.

use crate::data::Dataset;
use crate::error::{Error, Result};
use std::path::Path;

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::Config(format!("{}: empty file", path.display())));
    }
    let mut rows = Vec::new();
    for (ri, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(headers.len());
        for (ci, cell) in record.iter().enumerate() {
            let column = headers
                .get(ci)
                .cloned()
                .unwrap_or_else(|| format!("column {ci}"));
            let v: f64 = cell.trim().parse().map_err(|_| Error::CsvCell {
                row: ri + 2, // 1-based, after the header line
                column: column.clone(),
                message: format!("'{}' is not a number", cell),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvCell {
                    row: ri + 2,
                    column,
                    message: "value is not finite".into(),
                });
            }
            row.push(v);
        }
        if row.len() != headers.len() {
            return Err(Error::CsvCell {
                row: ri + 2,
                column: "<record>".into(),
                message: format!("{} cells, expected {}", row.len(), headers.len()),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Dataset::new(headers, rows)
}

pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(dataset.columns())?;
    for row in dataset.rows() {
        w.write_record(row.iter().map(|v| format_float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trippable representation; keeps artifact files
/// byte-stable across runs.
pub fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn loads_well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "a,b\n1,2\n3,4\n5,6\n").unwrap();
        let d = load_csv(&p).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.n_cols(), 2);
        assert_eq!(d.rows()[1], vec![3.0, 4.0]);
    }

    #[test]
    fn names_row_and_column_on_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "a,b\n1,2\n3,abc\n").unwrap();
        match load_csv(&p) {
            Err(Error::CsvCell { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("expected cell error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::File::create(&p).unwrap().flush().unwrap();
        assert!(load_csv(&p).is_err());
    }

    #[test]
    fn csv_round_trip_reparses() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d = Dataset::new(
            vec!["x".into(), "y".into()],
            vec![vec![1.5, -2.0], vec![0.333333, 1e-9]],
        )
        .unwrap();
        write_csv(&d, &p).unwrap();
        let back = load_csv(&p).unwrap();
        assert_eq!(d, back);
    }
}
