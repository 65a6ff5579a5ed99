use serde::Serialize;
use serde_json::json;

use super::{params_of, InputRsms, PreparedModel};
use crate::error::{Error, Result};
use crate::indices::{score, Degeneracy, Metric};
use crate::ingest::{ExperimentReport, ModelActivations, ReportKind};
use crate::RepMatrix;

/// `grid[i][j]` compares layer i of model a with layer j of model b.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerwiseGrid {
    pub metric: Metric,
    pub model_a: String,
    pub model_b: String,
    pub layers_a: Vec<String>,
    pub layers_b: Vec<String>,
    pub grid: Vec<Vec<Option<f64>>>,
    /// `(i, j, reason)` for every flagged cell.
    pub degenerate: Vec<(usize, usize, Degeneracy)>,
}

impl LayerwiseGrid {
    /// Column of the largest non-degenerate entry in row `i`.
    pub fn row_argmax(&self, i: usize) -> Option<usize> {
        self.grid[i]
            .iter()
            .enumerate()
            .filter_map(|(j, v)| v.map(|v| (j, v)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
    }

    pub fn report(&self, raw_input_rsm: bool) -> ExperimentReport {
        let params = params_of(&json!({
            "metric": self.metric,
            "model_a": self.model_a,
            "model_b": self.model_b,
            "raw_input_rsm": raw_input_rsm,
        }));
        let degenerate: Vec<_> =
            self.degenerate.iter().map(|(i, j, r)| json!({"i": i, "j": j, "reason": r})).collect();
        let results = json!({
            "layers_a": self.layers_a,
            "layers_b": self.layers_b,
            "grid": self.grid,
            "degenerate": degenerate,
        });
        ExperimentReport::new(ReportKind::LayerwiseGrid, params, results)
    }
}

/// Compares every layer of `a` with every layer of `b`, deconfounding both
/// against the RSM of the shared `inputs`.
pub fn layerwise_grid(
    a: &ModelActivations,
    b: &ModelActivations,
    metric: Metric,
    inputs: &RepMatrix,
    raw_input_rsm: bool,
) -> Result<LayerwiseGrid> {
    if a.n() != b.n() || a.n() != inputs.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "models have n={} and n={}, inputs n={}",
            a.n(),
            b.n(),
            inputs.nrows()
        )));
    }
    let metrics = [metric];
    let k0 = InputRsms::new(inputs, &metrics, raw_input_rsm)?;
    let (pa, pb) = rayon::join(|| PreparedModel::new(a, &metrics, &k0), || PreparedModel::new(b, &metrics, &k0));
    let (pa, pb) = (pa?, pb?);
    let mut grid = vec![vec![None; pb.depth()]; pa.depth()];
    let mut degenerate = Vec::new();
    for (i, la) in pa.layers(metric).iter().enumerate() {
        for (j, lb) in pb.layers(metric).iter().enumerate() {
            let s = score(la, lb)?;
            match s.reason {
                Some(r) => degenerate.push((i, j, r)),
                None => grid[i][j] = s.value,
            }
        }
    }
    Ok(LayerwiseGrid {
        metric,
        model_a: a.model_id.clone(),
        model_b: b.model_id.clone(),
        layers_a: pa.layer_names.clone(),
        layers_b: pb.layer_names.clone(),
        grid,
        degenerate,
    })
}
