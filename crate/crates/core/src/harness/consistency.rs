use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{check_metrics, mean, pair_value, params_of, InputRsms, PreparedModel, InputDist, RunOptions};
use crate::error::{Error, Result};
use crate::indices::Metric;
use crate::ingest::{ExperimentReport, ReportKind};
use crate::netsim::{apply_domain, perturb_gaussian, DomainSpec, SyntheticNet};
use crate::numerics::mean_stderr;
use crate::seed::derive_seed;
use crate::RepMatrix;

/// z-value of the two-sided 95% interval used by the ordering test.
const Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySpec {
    /// Perturbation σ of f₁, f₂, …; usually `i·σ₀`.
    pub noise_levels: Vec<f64>,
    pub trials: usize,
}

impl ConsistencySpec {
    /// Levels `σ₀, 2σ₀, …, count·σ₀`.
    pub fn linear(sigma0: f64, count: usize, trials: usize) -> Self {
        Self { noise_levels: (1..=count).map(|i| i as f64 * sigma0).collect(), trials }
    }

    fn validate(&self) -> Result<()> {
        if self.noise_levels.len() < 2 {
            return Err(Error::InvalidParameter("need at least 2 noise levels".into()));
        }
        if self.trials < 1 {
            return Err(Error::InvalidParameter("need at least 1 trial".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricConsistency {
    pub metric: Metric,
    /// `[layer][i]`: share of trials where f_{i+1} is identified as more
    /// similar than f_{i+2}.
    pub proportion: Vec<Vec<f64>>,
    /// Averaged over layers, one entry per adjacent level pair.
    pub proportion_by_level: Vec<f64>,
    /// Averaged over level pairs, one entry per layer.
    pub proportion_by_layer: Vec<f64>,
    pub mean_proportion: f64,
    /// `[trial][layer][level]` mean similarity to the reference across input sets.
    pub means: Vec<Vec<Vec<Option<f64>>>>,
    /// Standard errors matching `means`.
    pub stderrs: Vec<Vec<Vec<Option<f64>>>>,
    /// Degenerate scores dropped before aggregation.
    pub excluded: usize,
    /// Comparisons left undecided because a mean was undefined.
    pub undecided: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyResult {
    pub layers: Vec<String>,
    pub input_sets: usize,
    pub metrics: Vec<MetricConsistency>,
}

impl ConsistencyResult {
    pub fn metric(&self, m: Metric) -> Option<&MetricConsistency> {
        self.metrics.iter().find(|c| c.metric == m)
    }

    pub fn report(&self, kind: ReportKind, spec: &ConsistencySpec, extra: serde_json::Value, options: RunOptions) -> ExperimentReport {
        let mut params = params_of(spec);
        params.insert("seed".into(), json!(options.seed));
        params.insert("raw_input_rsm".into(), json!(options.raw_input_rsm));
        params.insert("input_sets".into(), json!(self.input_sets));
        if let serde_json::Value::Object(m) = extra {
            params.extend(m);
        }
        let results = json!({
            "layers": self.layers,
            "metrics": self.metrics.iter().map(|m| (m.metric.name().to_string(), serde_json::to_value(m).unwrap())).collect::<serde_json::Map<_, _>>(),
        });
        ExperimentReport::new(kind, params, results)
    }
}

/// `[metric][layer][level][set]` similarity of f_i to the reference.
type TrialScores = Vec<Vec<Vec<Vec<Option<f64>>>>>;

fn run_trial(
    reference: &SyntheticNet,
    spec: &ConsistencySpec,
    metrics: &[Metric],
    set_count: usize,
    inputs_for: &(dyn Fn(usize, usize) -> Result<RepMatrix> + Sync),
    trial: usize,
    options: RunOptions,
) -> Result<TrialScores> {
    let trial_seed = derive_seed(options.seed, "trial", trial as u64);
    let nets: Vec<SyntheticNet> = spec
        .noise_levels
        .iter()
        .enumerate()
        .map(|(i, &s)| perturb_gaussian(reference, s, derive_seed(trial_seed, "level", i as u64)))
        .collect::<Result<_>>()?;
    let depth = reference.layers.len();
    let levels = nets.len();
    let mut out = vec![vec![vec![vec![None; set_count]; levels]; depth]; metrics.len()];
    for d in 0..set_count {
        let x = inputs_for(trial, d)?;
        let k0 = InputRsms::new(&x, metrics, options.raw_input_rsm)?;
        let r = PreparedModel::from_net(reference, &x, metrics, &k0)?;
        for (i, net) in nets.iter().enumerate() {
            let p = PreparedModel::from_net(net, &x, metrics, &k0)?;
            for (mi, &m) in metrics.iter().enumerate() {
                for (l, (a, b)) in p.layers(m).iter().zip(r.layers(m)).enumerate() {
                    out[mi][l][i][d] = pair_value(a, b)?;
                }
            }
        }
    }
    Ok(out)
}

fn consistency_core(
    reference: &SyntheticNet,
    spec: &ConsistencySpec,
    metrics: &[Metric],
    set_count: usize,
    inputs_for: &(dyn Fn(usize, usize) -> Result<RepMatrix> + Sync),
    options: RunOptions,
) -> Result<ConsistencyResult> {
    check_metrics(metrics)?;
    spec.validate()?;
    let trials: Vec<TrialScores> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(reference, spec, metrics, set_count, inputs_for, t, options))
        .collect::<Result<_>>()?;

    let depth = reference.layers.len();
    let levels = spec.noise_levels.len();
    let pairs = levels - 1;
    let metrics = metrics
        .iter()
        .enumerate()
        .map(|(mi, &metric)| {
            let mut excluded = 0;
            let mut undecided = 0;
            let mut hits = vec![vec![0usize; pairs]; depth];
            let mut means = Vec::with_capacity(trials.len());
            let mut stderrs = Vec::with_capacity(trials.len());
            for t in &trials {
                let mut tm = vec![vec![None; levels]; depth];
                let mut ts = vec![vec![None; levels]; depth];
                for l in 0..depth {
                    for i in 0..levels {
                        let vals: Vec<f64> = t[mi][l][i].iter().flatten().copied().collect();
                        excluded += set_count - vals.len();
                        if let Ok((m, s)) = mean_stderr(&vals) {
                            tm[l][i] = Some(m);
                            ts[l][i] = Some(s);
                        }
                    }
                    for i in 0..pairs {
                        match (tm[l][i], ts[l][i], tm[l][i + 1], ts[l][i + 1]) {
                            (Some(m1), Some(s1), Some(m2), Some(s2)) => {
                                if m1 - Z * s1 > m2 + Z * s2 {
                                    hits[l][i] += 1;
                                }
                            }
                            _ => undecided += 1,
                        }
                    }
                }
                means.push(tm);
                stderrs.push(ts);
            }
            let nt = trials.len() as f64;
            let proportion: Vec<Vec<f64>> =
                hits.iter().map(|row| row.iter().map(|&h| h as f64 / nt).collect()).collect();
            let proportion_by_level =
                (0..pairs).map(|i| proportion.iter().map(|row| row[i]).sum::<f64>() / depth as f64).collect();
            let proportion_by_layer: Vec<f64> = proportion.iter().map(|row| mean(row).unwrap_or(0.0)).collect();
            let mean_proportion = mean(&proportion_by_layer).unwrap_or(0.0);
            MetricConsistency {
                metric,
                proportion,
                proportion_by_level,
                proportion_by_layer,
                mean_proportion,
                means,
                stderrs,
                excluded,
                undecided,
            }
        })
        .collect();
    Ok(ConsistencyResult {
        layers: (1..=depth).map(|i| format!("layer{i}")).collect(),
        input_sets: set_count,
        metrics,
    })
}

/// Ordering test across input domains: f_i is identified as closer to the
/// reference than f_{i+1} when their 1.96-standard-error intervals over
/// domains do not overlap.
pub fn cross_domain_consistency(
    reference: &SyntheticNet,
    spec: &ConsistencySpec,
    domains: &[DomainSpec],
    metrics: &[Metric],
    base_inputs: &RepMatrix,
    options: RunOptions,
) -> Result<ConsistencyResult> {
    if domains.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 domains".into()));
    }
    let inputs_for = |trial: usize, d: usize| {
        let seed = derive_seed(derive_seed(options.seed, "trial", trial as u64), "domain", d as u64);
        apply_domain(base_inputs, &domains[d], seed)
    };
    consistency_core(reference, spec, metrics, domains.len(), &inputs_for, options)
}

/// Same test with independently resampled input sets from one
/// distribution in place of domains. `fixed_inputs` reuses one set
/// everywhere.
pub fn in_domain_consistency(
    reference: &SyntheticNet,
    spec: &ConsistencySpec,
    set_count: usize,
    dist: InputDist,
    metrics: &[Metric],
    fixed_inputs: bool,
    options: RunOptions,
) -> Result<ConsistencyResult> {
    if set_count < 2 {
        return Err(Error::InvalidParameter("need at least 2 input sets".into()));
    }
    let p = reference.layers[0].weight.ncols();
    let inputs_for = |trial: usize, d: usize| {
        let seed = if fixed_inputs {
            derive_seed(options.seed, "input-set", 0)
        } else {
            derive_seed(derive_seed(options.seed, "trial", trial as u64), "input-set", d as u64)
        };
        dist.sample(p, seed)
    };
    consistency_core(reference, spec, metrics, set_count, &inputs_for, options)
}
