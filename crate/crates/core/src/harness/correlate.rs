use serde::Serialize;
use serde_json::json;

use super::{mean, pair_value, params_of, InputRsms, PreparedModel};
use crate::error::{Error, Result};
use crate::indices::Metric;
use crate::ingest::{ExperimentReport, ModelActivations, ReportKind, ScoreTable};
use crate::numerics::{kendall_tau_b, spearman};
use crate::RepMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerRankCorrelation {
    pub layer: String,
    pub spearman_rho: Option<f64>,
    pub kendall_tau: Option<f64>,
    /// Models with a non-degenerate similarity at this layer.
    pub models_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OodCorrelation {
    pub metric: Metric,
    pub reference: String,
    pub models: Vec<String>,
    /// |acc(f_i) − acc(f*)| per model.
    pub accuracy_gaps: Vec<f64>,
    /// `[layer][model]` dissimilarity 1 − s(f_i, f*).
    pub dissimilarity: Vec<Vec<Option<f64>>>,
    pub layers: Vec<LayerRankCorrelation>,
    pub mean_spearman_rho: Option<f64>,
    pub mean_kendall_tau: Option<f64>,
}

impl OodCorrelation {
    pub fn report(&self, raw_input_rsm: bool) -> ExperimentReport {
        let params = params_of(&json!({
            "metric": self.metric,
            "reference": self.reference,
            "models": self.models,
            "raw_input_rsm": raw_input_rsm,
        }));
        ExperimentReport::new(ReportKind::OodCorrelation, params, serde_json::to_value(self).unwrap())
    }
}

fn rank_pair(x: &[f64], y: &[f64]) -> (Option<f64>, Option<f64>) {
    if x.len() < 3 {
        return (None, None);
    }
    (spearman(x, y).ok(), kendall_tau_b(x, y).ok())
}

/// Rank correlation, per layer, between a model's dissimilarity to the
/// reference and its accuracy gap to the reference.
pub fn ood_correlation(
    models: &[ModelActivations],
    reference: &ModelActivations,
    inputs: &RepMatrix,
    metric: Metric,
    accuracy: &ScoreTable,
    raw_input_rsm: bool,
) -> Result<OodCorrelation> {
    if models.len() < 4 {
        return Err(Error::TooFewValues { needed: 4, got: models.len() });
    }
    let acc_ref = accuracy.get(&reference.model_id)?;
    let accuracy_gaps: Vec<f64> =
        models.iter().map(|m| Ok((accuracy.get(&m.model_id)? - acc_ref).abs())).collect::<Result<_>>()?;
    if accuracy_gaps.iter().all(|&g| g == accuracy_gaps[0]) {
        return Err(Error::DegenerateInput("accuracy gaps are all equal"));
    }
    for m in models {
        if m.n() != reference.n() || m.len() != reference.len() {
            return Err(Error::ShapeMismatch(format!("model {} does not match the reference layout", m.model_id)));
        }
    }

    let metrics = [metric];
    let k0 = InputRsms::new(inputs, &metrics, raw_input_rsm)?;
    let r = PreparedModel::new(reference, &metrics, &k0)?;
    let prepared: Vec<PreparedModel> = {
        use rayon::prelude::*;
        models.par_iter().map(|m| PreparedModel::new(m, &metrics, &k0)).collect::<Result<_>>()?
    };
    let depth = reference.len();
    let mut dissimilarity = vec![vec![None; models.len()]; depth];
    for (mi, p) in prepared.iter().enumerate() {
        for (l, (a, b)) in p.layers(metric).iter().zip(r.layers(metric)).enumerate() {
            dissimilarity[l][mi] = pair_value(a, b)?.map(|s| 1.0 - s);
        }
    }
    let layers: Vec<LayerRankCorrelation> = dissimilarity
        .iter()
        .zip(reference.layer_names())
        .map(|(row, layer)| {
            let (x, y): (Vec<f64>, Vec<f64>) =
                row.iter().zip(&accuracy_gaps).filter_map(|(d, &g)| d.map(|d| (d, g))).unzip();
            let (spearman_rho, kendall_tau) = rank_pair(&x, &y);
            LayerRankCorrelation { layer, spearman_rho, kendall_tau, models_used: x.len() }
        })
        .collect();
    let rhos: Vec<f64> = layers.iter().filter_map(|l| l.spearman_rho).collect();
    let taus: Vec<f64> = layers.iter().filter_map(|l| l.kendall_tau).collect();
    Ok(OodCorrelation {
        metric,
        reference: reference.model_id.clone(),
        models: models.iter().map(|m| m.model_id.clone()).collect(),
        accuracy_gaps,
        dissimilarity,
        layers,
        mean_spearman_rho: mean(&rhos),
        mean_kendall_tau: mean(&taus),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreCorrelation {
    pub keys: Vec<String>,
    pub spearman_rho: f64,
    pub kendall_tau: f64,
}

impl ScoreCorrelation {
    pub fn report(&self) -> ExperimentReport {
        let params = params_of(&json!({"keys": self.keys}));
        let results = json!({"spearman_rho": self.spearman_rho, "kendall_tau": self.kendall_tau});
        ExperimentReport::new(ReportKind::ScoreCorrelation, params, results)
    }
}

/// Spearman and Kendall correlation between two tables over their shared keys.
pub fn score_correlation(xs: &ScoreTable, ys: &ScoreTable) -> Result<ScoreCorrelation> {
    if !xs.entries.keys().eq(ys.entries.keys()) {
        return Err(Error::KeyMismatch);
    }
    if xs.len() < 3 {
        return Err(Error::TooFewValues { needed: 3, got: xs.len() });
    }
    let keys: Vec<String> = xs.entries.keys().cloned().collect();
    let a: Vec<f64> = xs.entries.values().copied().collect();
    let b: Vec<f64> = ys.entries.values().copied().collect();
    Ok(ScoreCorrelation { keys, spearman_rho: spearman(&a, &b)?, kendall_tau: kendall_tau_b(&a, &b)? })
}
