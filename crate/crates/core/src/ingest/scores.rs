use std::collections::BTreeMap;
use std::path::Path;

use super::io_err;
use crate::error::{Error, Result};

/// Finite real scores keyed by model or domain id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub entries: BTreeMap<String, f64>,
}

impl ScoreTable {
    pub fn insert(&mut self, key: impl Into<String>, value: f64) -> Result<()> {
        let key = key.into();
        if !value.is_finite() {
            return Err(Error::ParseError(format!("non-finite value for {key:?}")));
        }
        if self.entries.contains_key(&key) {
            return Err(Error::DuplicateKey(key));
        }
        self.entries.insert(key, value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.entries.get(key).copied().ok_or_else(|| Error::MissingScore(key.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `key,value` lines, keys sorted.
    pub fn to_csv(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k},{v:?}\n")).collect()
    }
}

impl FromIterator<(String, f64)> for ScoreTable {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Self { entries: iter.into_iter().collect() }
    }
}

/// Two-column `key,value` CSV without a header.
pub fn load_score_table(path: &Path) -> Result<ScoreTable> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut table = ScoreTable::default();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::ParseError(e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::ParseError(format!("line {}: expected 2 fields, got {}", line + 1, rec.len())));
        }
        let value: f64 = rec[1]
            .parse()
            .map_err(|_| Error::ParseError(format!("line {}: bad value {:?}", line + 1, &rec[1])))?;
        table.insert(&rec[0], value)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<ScoreTable> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, s).unwrap();
        load_score_table(&path)
    }

    #[test]
    fn loads_entries() {
        let t = load("m1,0.89\nm2,0.91").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("m2").unwrap(), 0.91);
        assert!(matches!(t.get("m3"), Err(Error::MissingScore(_))));
        assert_eq!(load(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn errors() {
        assert!(matches!(load("m1,0.1\nm1,0.2\n"), Err(Error::DuplicateKey(_))));
        assert!(matches!(load("m1,abc\n"), Err(Error::ParseError(_))));
        assert!(matches!(load("m1,0.1,3\n"), Err(Error::ParseError(_))));
        assert!(matches!(load("m1,nan\n"), Err(Error::ParseError(_))));
    }
}
