use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use super::{io_err, load_activation_matrix, ActivationFileRef, ActivationFormat};
use crate::error::{Error, Result};
use crate::RepMatrix;

/// One model's layer activations over a shared example set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelActivations {
    pub model_id: String,
    pub layers: Vec<(String, RepMatrix)>,
}

impl ModelActivations {
    /// Checks that layer names are unique and row counts agree.
    pub fn new(model_id: impl Into<String>, layers: Vec<(String, RepMatrix)>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::SchemaError("model has no layers".into()));
        }
        let mut seen = HashSet::new();
        let n = layers[0].1.nrows();
        for (name, m) in &layers {
            if !seen.insert(name.as_str()) {
                return Err(Error::SchemaError(format!("duplicate layer name {name:?}")));
            }
            if m.nrows() != n {
                return Err(Error::RowCountMismatch { layer: name.clone(), expected: n, got: m.nrows() });
            }
        }
        Ok(Self { model_id: model_id.into(), layers })
    }

    pub fn n(&self) -> usize {
        self.layers[0].1.nrows()
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn layer(&self, name: &str) -> Option<&RepMatrix> {
        self.layers.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn matrices(&self) -> Vec<&RepMatrix> {
        self.layers.iter().map(|(_, m)| m).collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    model_id: String,
    layers: Vec<LayerEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    name: String,
    path: String,
    format: Option<ActivationFormat>,
}

/// Loads a JSON manifest; layer paths resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<ModelActivations> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let m: ManifestFile = serde_json::from_str(&text).map_err(|e| Error::SchemaError(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    for l in &m.layers {
        if !seen.insert(l.name.as_str()) {
            return Err(Error::SchemaError(format!("duplicate layer name {:?}", l.name)));
        }
    }
    let layers = m
        .layers
        .iter()
        .map(|l| {
            let p = base.join(&l.path);
            let r = match l.format {
                Some(f) => ActivationFileRef::new(p, f),
                None => ActivationFileRef::from_path(p).map_err(|e| Error::SchemaError(e.to_string()))?,
            };
            Ok((l.name.clone(), load_activation_matrix(&r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    ModelActivations::new(m.model_id, layers)
}
