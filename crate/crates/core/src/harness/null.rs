use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{check_metrics, mean, pair_value, params_of, InputRsms, PreparedModel, RunOptions};
use crate::error::{Error, Result};
use crate::indices::Metric;
use crate::ingest::{ExperimentReport, ReportKind};
use crate::netsim::{perturb_gaussian, permute_weights, SyntheticNet};
use crate::numerics::quantile;
use crate::seed::derive_seed;
use crate::RepMatrix;

/// How random networks are derived from the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NullGenerator {
    Permute,
    Gaussian { sigma: f64 },
}

impl NullGenerator {
    pub fn generate(&self, reference: &SyntheticNet, seed: u64) -> Result<SyntheticNet> {
        match *self {
            NullGenerator::Permute => Ok(permute_weights(reference, seed)),
            NullGenerator::Gaussian { sigma } => perturb_gaussian(reference, sigma, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// Empirical 97.5th percentile of the null sample (linear interpolation).
    #[serde(rename = "percentile_97_5")]
    Percentile97_5,
    /// Null mean plus 1.96 sample standard deviations.
    #[serde(rename = "mean_plus_1_96_sd")]
    MeanPlus196Sd,
}

impl ThresholdRule {
    /// `None` when the sample is too small or constant.
    pub fn threshold(self, null: &[f64]) -> Option<f64> {
        if null.len() < 2 || null.iter().all(|&v| v == null[0]) {
            return None;
        }
        match self {
            ThresholdRule::Percentile97_5 => quantile(null, 0.975).ok(),
            ThresholdRule::MeanPlus196Sd => {
                let m = null.len() as f64;
                let mu = null.iter().sum::<f64>() / m;
                let sd = (null.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
                Some(mu + 1.96 * sd)
            }
        }
    }
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "percentile_97_5" | "percentile" => Ok(Self::Percentile97_5),
            "mean_plus_1_96_sd" | "mean_sd" => Ok(Self::MeanPlus196Sd),
            _ => Err(Error::InvalidParameter(format!("unknown threshold rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSpec {
    pub generator: NullGenerator,
    pub pair_count: usize,
    pub threshold_rule: ThresholdRule,
}

impl NullSpec {
    pub fn new(generator: NullGenerator, pair_count: usize, threshold_rule: ThresholdRule) -> Result<Self> {
        if pair_count < 2 {
            return Err(Error::InvalidParameter(format!("pair_count must be at least 2, got {pair_count}")));
        }
        Ok(Self { generator, pair_count, threshold_rule })
    }
}

/// Networks whose similarity to the reference is tested against the null.
#[derive(Debug, Clone, PartialEq)]
pub enum Alternatives {
    Nets(Vec<SyntheticNet>),
    /// `count` Gaussian perturbations of the reference.
    Perturbed { count: usize, sigma: f64 },
    /// `count` further pairs drawn from the null generator, scored against
    /// each other; checks the false-positive rate.
    FromNull { count: usize },
}

impl Alternatives {
    fn count(&self) -> usize {
        match self {
            Alternatives::Nets(v) => v.len(),
            Alternatives::Perturbed { count, .. } | Alternatives::FromNull { count } => *count,
        }
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            Alternatives::Nets(v) => json!({"type": "nets", "ids": v.iter().map(|n| &n.net_id).collect::<Vec<_>>()}),
            Alternatives::Perturbed { count, sigma } => json!({"type": "perturbed", "count": count, "sigma": sigma}),
            Alternatives::FromNull { count } => json!({"type": "from_null", "count": count}),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerDetection {
    pub layer: String,
    pub threshold: Option<f64>,
    /// Share of alternatives scoring strictly above the threshold.
    pub proportion: Option<f64>,
    pub degenerate_null: bool,
    pub null_scores: Vec<f64>,
    pub alternative_scores: Vec<f64>,
    pub null_excluded: usize,
    pub alternative_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDetection {
    pub metric: Metric,
    pub layers: Vec<LayerDetection>,
    /// Mean over layers with a defined proportion.
    pub mean_proportion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullDetection {
    pub metrics: Vec<MetricDetection>,
}

impl NullDetection {
    pub fn metric(&self, m: Metric) -> Option<&MetricDetection> {
        self.metrics.iter().find(|d| d.metric == m)
    }
}

/// Per-metric, per-layer scores of one pair.
type PairScores = Vec<Vec<Option<f64>>>;

fn pair_scores(a: &PreparedModel, b: &PreparedModel, metrics: &[Metric]) -> Result<PairScores> {
    metrics
        .iter()
        .map(|&m| a.layers(m).iter().zip(b.layers(m)).map(|(x, y)| pair_value(x, y)).collect())
        .collect()
}

/// Detects alternatives whose similarity to the reference exceeds the
/// upper end of a null distribution of random-pair similarities, layer by
/// layer.
pub fn null_detection(
    reference: &SyntheticNet,
    alternatives: &Alternatives,
    null: &NullSpec,
    metrics: &[Metric],
    inputs: &RepMatrix,
    options: RunOptions,
) -> Result<NullDetection> {
    check_metrics(metrics)?;
    if alternatives.count() < 2 {
        return Err(Error::InvalidParameter("need at least 2 alternatives".into()));
    }
    let k0 = InputRsms::new(inputs, metrics, options.raw_input_rsm)?;
    let prep = |net: &SyntheticNet| PreparedModel::from_net(net, inputs, metrics, &k0);
    let random_pair = |role_a: &str, role_b: &str, k: usize| -> Result<PairScores> {
        let a = null.generator.generate(reference, derive_seed(options.seed, role_a, k as u64))?;
        let b = null.generator.generate(reference, derive_seed(options.seed, role_b, k as u64))?;
        pair_scores(&prep(&a)?, &prep(&b)?, metrics)
    };

    let null_scores: Vec<PairScores> =
        (0..null.pair_count).into_par_iter().map(|k| random_pair("null-a", "null-b", k)).collect::<Result<_>>()?;

    let alt_scores: Vec<PairScores> = match alternatives {
        Alternatives::FromNull { count } => {
            (0..*count).into_par_iter().map(|k| random_pair("alt-null-a", "alt-null-b", k)).collect::<Result<_>>()?
        }
        Alternatives::Nets(nets) => {
            let r = prep(reference)?;
            nets.par_iter().map(|n| pair_scores(&prep(n)?, &r, metrics)).collect::<Result<_>>()?
        }
        Alternatives::Perturbed { count, sigma } => {
            let r = prep(reference)?;
            (0..*count)
                .into_par_iter()
                .map(|k| {
                    let alt = perturb_gaussian(reference, *sigma, derive_seed(options.seed, "alt", k as u64))?;
                    pair_scores(&prep(&alt)?, &r, metrics)
                })
                .collect::<Result<_>>()?
        }
    };

    let depth = reference.layers.len();
    let layer_names: Vec<String> = (1..=depth).map(|i| format!("layer{i}")).collect();
    let metrics = metrics
        .iter()
        .enumerate()
        .map(|(mi, &metric)| {
            let layers: Vec<LayerDetection> = (0..depth)
                .map(|l| {
                    let collect = |s: &[PairScores]| -> (Vec<f64>, usize) {
                        let vals: Vec<f64> = s.iter().filter_map(|p| p[mi][l]).collect();
                        let excluded = s.len() - vals.len();
                        (vals, excluded)
                    };
                    let (null_scores, null_excluded) = collect(&null_scores);
                    let (alternative_scores, alternative_excluded) = collect(&alt_scores);
                    let threshold = null.threshold_rule.threshold(&null_scores);
                    let proportion = threshold.filter(|_| !alternative_scores.is_empty()).map(|t| {
                        alternative_scores.iter().filter(|&&v| v > t).count() as f64 / alternative_scores.len() as f64
                    });
                    LayerDetection {
                        layer: layer_names[l].clone(),
                        threshold,
                        proportion,
                        degenerate_null: threshold.is_none(),
                        null_scores,
                        alternative_scores,
                        null_excluded,
                        alternative_excluded,
                    }
                })
                .collect();
            let props: Vec<f64> = layers.iter().filter_map(|l| l.proportion).collect();
            MetricDetection { metric, mean_proportion: mean(&props), layers }
        })
        .collect();
    Ok(NullDetection { metrics })
}

impl NullDetection {
    pub fn report(&self, spec: &NullSpec, alternatives: &Alternatives, options: RunOptions) -> ExperimentReport {
        let params = params_of(&json!({
            "null": spec,
            "alternatives": alternatives.describe(),
            "seed": options.seed,
            "raw_input_rsm": options.raw_input_rsm,
        }));
        let results = json!({
            "metrics": self.metrics.iter().map(|m| (m.metric.name().to_string(), serde_json::to_value(m).unwrap())).collect::<serde_json::Map<_, _>>(),
        });
        ExperimentReport::new(ReportKind::NullDetection, params, results)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{make_inputs, make_mlp, Activation};

    fn setup() -> (SyntheticNet, RepMatrix) {
        (make_mlp(&[6, 10, 8], Activation::Relu, 1).unwrap(), make_inputs(24, 6, 2).unwrap())
    }

    #[test]
    fn thresholds() {
        let v: Vec<f64> = (0..=40).map(f64::from).collect();
        assert!((ThresholdRule::Percentile97_5.threshold(&v).unwrap() - 39.0).abs() < 1e-12);
        let t = ThresholdRule::MeanPlus196Sd.threshold(&[1.0, 3.0]).unwrap();
        assert!((t - (2.0 + 1.96 * 2f64.sqrt())).abs() < 1e-12);
        assert_eq!(ThresholdRule::Percentile97_5.threshold(&[0.5, 0.5, 0.5]), None);
        assert!(NullSpec::new(NullGenerator::Permute, 1, ThresholdRule::Percentile97_5).is_err());
    }

    #[test]
    fn identical_alternatives_always_detected() {
        let (net, x) = setup();
        let null = NullSpec::new(NullGenerator::Gaussian { sigma: 10.0 }, 10, ThresholdRule::Percentile97_5).unwrap();
        let alts = Alternatives::Nets(vec![net.clone(), net.clone(), net.clone()]);
        let out = null_detection(&net, &alts, &null, &[Metric::Cka, Metric::Dcka], &x, RunOptions::new(3)).unwrap();
        for m in &out.metrics {
            for l in &m.layers {
                assert_eq!(l.proportion, Some(1.0), "{} {}", m.metric, l.layer);
                assert_eq!(l.null_scores.len(), 10);
            }
        }
    }

    #[test]
    fn deterministic_and_reports() {
        let (net, x) = setup();
        let null = NullSpec::new(NullGenerator::Permute, 5, ThresholdRule::Percentile97_5).unwrap();
        let alts = Alternatives::Perturbed { count: 4, sigma: 0.3 };
        let run = || null_detection(&net, &alts, &null, &[Metric::Drsa], &x, RunOptions::new(9)).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        let r = a.report(&null, &alts, RunOptions::new(9));
        assert!(r.results["metrics"]["drsa"]["layers"].as_array().unwrap().len() == 2);
        assert!(null_detection(&net, &Alternatives::FromNull { count: 1 }, &null, &[Metric::Cka], &x, RunOptions::new(0)).is_err());
    }

    #[test]
    fn constant_null_is_flagged() {
        let (net, x) = setup();
        // σ = 0 makes every null net the reference itself
        let null = NullSpec::new(NullGenerator::Gaussian { sigma: 0.0 }, 4, ThresholdRule::Percentile97_5).unwrap();
        let out = null_detection(&net, &Alternatives::FromNull { count: 3 }, &null, &[Metric::Cka], &x, RunOptions::new(1))
            .unwrap();
        assert!(out.metrics[0].layers.iter().all(|l| l.degenerate_null && l.proportion.is_none()));
    }
}
