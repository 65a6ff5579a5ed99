//! Experiment protocols: layerwise grids, null detection, consistency
//! tests and rank-correlation analyses.
//!
//! Every protocol prepares each (model, input set, metric) once and then
//! scores pairs of prepared RSMs, so regressions and eigendecompositions
//! are never repeated. Stochastic protocols take a master seed; child seeds
//! come from [`derive_seed`](crate::seed::derive_seed) with fixed role tags,
//! and work units are reduced in index order, so reports do not depend on
//! thread count.

mod consistency;
mod correlate;
mod diagnose;
mod grid;
mod null;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::indices::{prepare, Degeneracy, Metric};
use crate::ingest::ModelActivations;
use crate::netsim::{forward_model, make_inputs_decaying, make_mlp, Activation, SyntheticNet};
use crate::rsm::{build_rsm, input_rsm, MatrixState, RsmKind};
use crate::seed::derive_seed;
use crate::{PreparedRsm, RepMatrix, Rsm};

pub use crate::ingest::{ExperimentReport, ReportKind};
pub use consistency::{
    cross_domain_consistency, in_domain_consistency, ConsistencyResult, ConsistencySpec, MetricConsistency,
};
pub use correlate::{ood_correlation, score_correlation, LayerRankCorrelation, OodCorrelation, ScoreCorrelation};
pub use diagnose::{diagnose, Diagnosis, LayerDiagnosis};
pub use grid::{layerwise_grid, LayerwiseGrid};
pub use null::{
    null_detection, Alternatives, LayerDetection, MetricDetection, NullDetection, NullGenerator, NullSpec,
    ThresholdRule,
};

/// Settings shared by every protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: u64,
    /// Build the input RSM from the inputs as given instead of preprocessing them.
    pub raw_input_rsm: bool,
}

impl RunOptions {
    pub fn new(seed: u64) -> Self {
        Self { seed, raw_input_rsm: false }
    }
}

/// Distribution of simulated input sets: `n` Gaussian rows whose column
/// variances decay as `(j+1)^(−decay)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputDist {
    pub n: usize,
    pub decay: f64,
}

impl InputDist {
    pub fn sample(&self, p: usize, seed: u64) -> Result<RepMatrix> {
        make_inputs_decaying(self.n, p, self.decay, seed)
    }
}

/// A reference MLP and an input set, both drawn from one master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetup {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub inputs: InputDist,
}

impl SimSetup {
    pub fn build(&self, seed: u64) -> Result<(SyntheticNet, RepMatrix)> {
        let net = make_mlp(&self.sizes, self.activation, derive_seed(seed, "reference", 0))?;
        let x = self.inputs.sample(self.sizes[0], derive_seed(seed, "inputs", 0))?;
        Ok((net, x))
    }
}

/// Input RSMs of whichever kinds a metric list needs.
#[derive(Debug, Clone)]
pub struct InputRsms {
    kernel: Option<Rsm>,
    distance: Option<Rsm>,
}

impl InputRsms {
    pub fn new(inputs: &RepMatrix, metrics: &[Metric], raw: bool) -> Result<Self> {
        let need = |k: RsmKind| metrics.iter().any(|m| m.kind() == k);
        let build = |k: RsmKind| if need(k) { input_rsm(inputs, k, raw).map(Some) } else { Ok(None) };
        Ok(Self { kernel: build(RsmKind::Kernel)?, distance: build(RsmKind::SquaredDistance)? })
    }

    pub fn get(&self, kind: RsmKind) -> &Rsm {
        match kind {
            RsmKind::Kernel => self.kernel.as_ref(),
            RsmKind::SquaredDistance => self.distance.as_ref(),
        }
        .expect("input RSM built for every requested metric kind")
    }
}

/// RSMs of every layer. Raw layers are preprocessed; a layer with no
/// variance is kept unnormalized so its scores come out flagged.
pub fn layer_rsms(layers: &[(String, RepMatrix)], kind: RsmKind) -> Result<Vec<Rsm>> {
    layers
        .iter()
        .map(|(name, m)| {
            let x = match m.state() {
                MatrixState::Raw => match m.preprocess() {
                    Ok(x) => x,
                    Err(Error::DegenerateMatrix) => m.as_passthrough(),
                    Err(e) => return Err(e),
                },
                _ => m.clone(),
            };
            build_rsm(&x, kind, name.clone())
        })
        .collect()
}

/// One model reduced to prepared RSMs, per metric and layer.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    pub model_id: String,
    pub layer_names: Vec<String>,
    by_metric: Vec<(Metric, Vec<PreparedRsm>)>,
}

impl PreparedModel {
    pub fn new(model: &ModelActivations, metrics: &[Metric], k0: &InputRsms) -> Result<Self> {
        let mut rsms: Vec<(RsmKind, Vec<Rsm>)> = Vec::new();
        let mut by_metric = Vec::with_capacity(metrics.len());
        for &metric in metrics {
            let kind = metric.kind();
            if !rsms.iter().any(|(k, _)| *k == kind) {
                rsms.push((kind, layer_rsms(&model.layers, kind)?));
            }
            let stack = &rsms.iter().find(|(k, _)| *k == kind).unwrap().1;
            let conf = k0.get(kind);
            let prepared = (1..=stack.len())
                .map(|depth| match prepare(metric, stack, conf, depth) {
                    // a constant previous layer cannot serve as a confounder
                    Err(Error::SingularConfounder) => Ok(PreparedRsm::flagged(
                        metric,
                        conf.n(),
                        stack[depth - 1].source(),
                        Degeneracy::Residual,
                    )),
                    r => r,
                })
                .collect::<Result<Vec<_>>>()?;
            by_metric.push((metric, prepared));
        }
        Ok(Self { model_id: model.model_id.clone(), layer_names: model.layer_names(), by_metric })
    }

    /// Runs `net` on `inputs` and prepares the result.
    pub fn from_net(net: &SyntheticNet, inputs: &RepMatrix, metrics: &[Metric], k0: &InputRsms) -> Result<Self> {
        Self::new(&forward_model(net, inputs)?, metrics, k0)
    }

    pub fn layers(&self, metric: Metric) -> &[PreparedRsm] {
        &self.by_metric.iter().find(|(m, _)| *m == metric).expect("metric was prepared").1
    }

    pub fn depth(&self) -> usize {
        self.layer_names.len()
    }
}

/// Similarity value at one layer pair, `None` when degenerate.
pub(crate) fn pair_value(a: &PreparedRsm, b: &PreparedRsm) -> Result<Option<f64>> {
    Ok(crate::indices::score(a, b)?.value)
}

pub(crate) fn params_of<T: Serialize>(p: &T) -> Map<String, Value> {
    match serde_json::to_value(p).expect("params serialize") {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

pub(crate) fn check_metrics(metrics: &[Metric]) -> Result<()> {
    if metrics.is_empty() {
        return Err(Error::InvalidParameter("no metric requested".into()));
    }
    Ok(())
}

pub(crate) fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
