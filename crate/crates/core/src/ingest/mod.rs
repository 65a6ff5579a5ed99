//! Reading activations, manifests and score tables; writing reports.

mod manifest;
mod npy;
mod report;
mod scores;
mod text;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::RepMatrix;

pub use manifest::{load_manifest, ModelActivations};
pub use npy::{read_npy, write_npy};
pub use report::{load_report, render_report, to_csv_string, to_json_string, value_to_json_string, write_report, ExperimentReport, ReportFormat, ReportKind};
pub use scores::{load_score_table, ScoreTable};
pub use text::read_csv_matrix;

/// Row cap guarding the dense n×n structures built downstream.
pub const MAX_EXAMPLES: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationFormat {
    Npy,
    Csv,
}

impl std::str::FromStr for ActivationFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "npy" => Ok(Self::Npy),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::InvalidParameter(format!("unknown activation format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationFileRef {
    pub path: PathBuf,
    pub format: ActivationFormat,
}

impl ActivationFileRef {
    pub fn new(path: impl Into<PathBuf>, format: ActivationFormat) -> Self {
        Self { path: path.into(), format }
    }

    /// Infers the format from the extension.
    pub fn from_path(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some(ext) => ext.parse()?,
            None => return Err(Error::InvalidParameter(format!("cannot infer format of {}", path.display()))),
        };
        Ok(Self { path, format })
    }
}

/// Loads a raw, unpreprocessed activation matrix.
pub fn load_activation_matrix(r: &ActivationFileRef) -> Result<RepMatrix> {
    if !r.path.is_file() {
        return Err(Error::MissingFile(r.path.clone()));
    }
    let data = match r.format {
        ActivationFormat::Npy => read_npy(&r.path)?,
        ActivationFormat::Csv => read_csv_matrix(&r.path)?,
    };
    if data.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if data.nrows() > MAX_EXAMPLES {
        return Err(Error::TooLarge { n: data.nrows(), cap: MAX_EXAMPLES });
    }
    RepMatrix::raw(data)
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub(crate) fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedFile { path: path.to_path_buf(), reason: reason.into() }
}
