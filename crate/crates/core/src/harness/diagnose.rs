use serde::Serialize;
use serde_json::json;

use super::{layer_rsms, params_of};
use crate::deconfound::{adjust, confounder_diagnostics, residual_dw};
use crate::error::Result;
use crate::ingest::{ExperimentReport, ModelActivations, ReportKind};
use crate::rsm::{input_rsm, RsmKind};
use crate::{PolyFit, RepMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerDiagnosis {
    pub layer: String,
    /// Orders 1..=max_order.
    pub fits: Vec<PolyFit>,
    pub best_bic_order: usize,
    pub alpha_hat: f64,
    pub r_squared: f64,
    /// Absent when the residual is zero.
    pub dw_mean: Option<f64>,
    pub dw_per_row: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnosis {
    pub model_id: String,
    pub kind: RsmKind,
    pub max_order: usize,
    pub layers: Vec<LayerDiagnosis>,
}

impl Diagnosis {
    pub fn report(&self, raw_input_rsm: bool) -> ExperimentReport {
        let params = params_of(&json!({
            "model_id": self.model_id,
            "kind": self.kind,
            "max_order": self.max_order,
            "raw_input_rsm": raw_input_rsm,
        }));
        let results = json!({"layers": self.layers});
        ExperimentReport::new(ReportKind::Diagnose, params, results)
    }
}

/// Polynomial-order BIC scan and residual Durbin–Watson statistics of
/// every layer's RSM against the input RSM.
pub fn diagnose(
    model: &ModelActivations,
    inputs: &RepMatrix,
    kind: RsmKind,
    max_order: usize,
    raw_input_rsm: bool,
) -> Result<Diagnosis> {
    let k0 = input_rsm(inputs, kind, raw_input_rsm)?;
    let layers = layer_rsms(&model.layers, kind)?
        .iter()
        .map(|k| {
            let fits = confounder_diagnostics(k, &k0, max_order)?;
            let best_bic_order = fits.iter().min_by(|a, b| a.bic.total_cmp(&b.bic)).map(|f| f.order).unwrap_or(1);
            let d = adjust(k, &k0)?;
            let dw = if d.is_fully_explained() { None } else { residual_dw(&d).ok() };
            Ok(LayerDiagnosis {
                layer: k.source().to_string(),
                fits,
                best_bic_order,
                alpha_hat: d.alpha_hat,
                r_squared: d.r_squared,
                dw_mean: dw.as_ref().map(|w| w.mean),
                dw_per_row: dw.map(|w| w.per_row).unwrap_or_default(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Diagnosis { model_id: model.model_id.clone(), kind, max_order, layers })
}
