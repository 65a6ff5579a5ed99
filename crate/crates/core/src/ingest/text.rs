use std::path::Path;

use ndarray::Array2;

use super::{io_err, malformed};
use crate::error::{Error, Result};

/// Headerless comma-separated matrix; scientific notation is accepted.
pub fn read_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(file);
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match ncols {
            None => ncols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(malformed(path, format!("row {row} has {} fields, expected {c}", rec.len())));
            }
            _ => {}
        }
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| malformed(path, format!("cannot parse {field:?} at ({row}, {col})")))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row, col });
            }
            values.push(v);
        }
        nrows += 1;
    }
    let Some(p) = ncols else {
        return Err(Error::EmptyMatrix);
    };
    Array2::from_shape_vec((nrows, p), values).map_err(|e| malformed(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn load(s: &str) -> Result<Array2<f64>> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, s).unwrap();
        read_csv_matrix(&path)
    }

    #[test]
    fn parses_plain_and_scientific() {
        assert_eq!(load("1,2\n3,4\n5,6").unwrap(), array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(load("1e-3, -2.5E2\n").unwrap(), array![[1e-3, -250.0]]);
    }

    #[test]
    fn rejects_bad_content() {
        assert!(matches!(load("1,nan\n"), Err(Error::NonFiniteEntry { row: 0, col: 1 })));
        assert!(matches!(load("1,2\n3,inf\n"), Err(Error::NonFiniteEntry { row: 1, col: 1 })));
        assert!(matches!(load(""), Err(Error::EmptyMatrix)));
        assert!(matches!(load("1,2\n3\n"), Err(Error::MalformedFile { .. })));
        assert!(matches!(load("1,x\n"), Err(Error::MalformedFile { .. })));
    }
}
