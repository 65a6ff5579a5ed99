//! Seeded synthetic MLPs, parameter perturbations and input domains.
//!
//! Stand-ins for pretrained/randomized networks: a reference net is drawn
//! with fan-in-scaled Gaussian weights, "similar" nets add modest Gaussian
//! noise to every parameter, and "random" nets either add very large noise
//! or shuffle each weight matrix.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ModelActivations;
use crate::seed::derive_seed;
use crate::RepMatrix;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            _ => Err(Error::InvalidParameter(format!("unknown activation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// d_out × d_in
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LineageEvent {
    Init { seed: u64 },
    Gaussian { sigma: f64, seed: u64 },
    Permute { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticNet {
    pub net_id: String,
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
    pub lineage: Vec<LineageEvent>,
}

impl SyntheticNet {
    /// Layer widths, input first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].weight.ncols()];
        s.extend(self.layers.iter().map(|l| l.weight.nrows()));
        s
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Every weight then bias, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied()).collect()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.net_id = id.into();
        self
    }
}

/// `n × p` i.i.d. standard normal inputs.
pub fn make_inputs(n: usize, p: usize, seed: u64) -> Result<RepMatrix> {
    if n < 4 || p < 1 {
        return Err(Error::InvalidParameter(format!("inputs need n >= 4 and p >= 1, got {n}x{p}")));
    }
    let mut r = rng(seed);
    RepMatrix::raw(Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut r)))
}

/// Gaussian inputs whose column `j` has variance proportional to
/// `(j+1)^(−decay)`, normalized to unit average variance: a power-law
/// spectrum loosely resembling natural data at the scale of
/// [`make_inputs`], which is the `decay = 0` case.
pub fn make_inputs_decaying(n: usize, p: usize, decay: f64, seed: u64) -> Result<RepMatrix> {
    if !(decay >= 0.0 && decay.is_finite()) {
        return Err(Error::InvalidParameter(format!("decay must be finite and >= 0, got {decay}")));
    }
    let x = make_inputs(n, p, seed)?.into_data();
    let var = Array1::from_shape_fn(p, |j| ((j + 1) as f64).powf(-decay));
    let total = var.sum();
    let scales = var.mapv(|v| (v * p as f64 / total).sqrt());
    RepMatrix::raw(x * &scales.insert_axis(Axis(0)))
}

/// MLP with weights drawn i.i.d. N(0, 1/d_in) and zero biases.
pub fn make_mlp(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<SyntheticNet> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::InvalidParameter(format!("invalid layer sizes {layer_sizes:?}")));
    }
    let mut r = rng(seed);
    let layers = layer_sizes
        .windows(2)
        .map(|w| {
            let (d_in, d_out) = (w[0], w[1]);
            let std = 1.0 / (d_in as f64).sqrt();
            let weight = Array2::from_shape_fn((d_out, d_in), |_| {
                let z: f64 = StandardNormal.sample(&mut r);
                z * std
            });
            DenseLayer { weight, bias: Array1::zeros(d_out) }
        })
        .collect();
    Ok(SyntheticNet {
        net_id: format!("mlp-{seed}"),
        layers,
        activation,
        lineage: vec![LineageEvent::Init { seed }],
    })
}

/// Post-activation outputs of every layer, in order.
pub fn forward_collect(net: &SyntheticNet, inputs: &RepMatrix) -> Result<Vec<RepMatrix>> {
    let d_in = net.layers[0].weight.ncols();
    if inputs.ncols() != d_in {
        return Err(Error::ShapeMismatch(format!("inputs have {} columns, net expects {d_in}", inputs.ncols())));
    }
    let mut h = inputs.data().to_owned();
    let mut out = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let mut z = h.dot(&layer.weight.t());
        z += &layer.bias.view().insert_axis(Axis(0));
        z.mapv_inplace(|v| net.activation.apply(v));
        out.push(RepMatrix::raw(z.clone())?);
        h = z;
    }
    Ok(out)
}

/// Runs the net and labels its layers `layer1..layerL`.
pub fn forward_model(net: &SyntheticNet, inputs: &RepMatrix) -> Result<ModelActivations> {
    let layers = forward_collect(net, inputs)?
        .into_iter()
        .enumerate()
        .map(|(i, m)| (format!("layer{}", i + 1), m))
        .collect();
    ModelActivations::new(net.net_id.clone(), layers)
}

/// Adds independent N(0, σ²) noise to every weight and bias.
pub fn perturb_gaussian(net: &SyntheticNet, sigma: f64, seed: u64) -> Result<SyntheticNet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let mut out = net.clone();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("valid sigma");
        let mut r = rng(seed);
        for layer in &mut out.layers {
            layer.weight.mapv_inplace(|w| w + normal.sample(&mut r));
            layer.bias.mapv_inplace(|b| b + normal.sample(&mut r));
        }
    }
    out.lineage.push(LineageEvent::Gaussian { sigma, seed });
    out.net_id = format!("{}+g{sigma}@{seed}", net.net_id);
    Ok(out)
}

/// Shuffles the entries of each weight matrix independently; biases are kept.
pub fn permute_weights(net: &SyntheticNet, seed: u64) -> SyntheticNet {
    let mut out = net.clone();
    for (i, layer) in out.layers.iter_mut().enumerate() {
        let mut r = rng(derive_seed(seed, "permute-layer", i as u64));
        let shape = layer.weight.raw_dim();
        let mut flat: Vec<f64> = layer.weight.iter().copied().collect();
        flat.shuffle(&mut r);
        layer.weight = Array2::from_shape_vec(shape, flat).expect("same shape");
    }
    out.lineage.push(LineageEvent::Permute { seed });
    out.net_id = format!("{}+perm@{seed}", net.net_id);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainTransform {
    Identity,
    AdditiveGaussian { sigma: f64 },
    ContrastScale { c: f64 },
    PixelDropout { rate: f64 },
    /// Row-wise moving average over `window` neighbouring columns.
    Smooth { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain_id: String,
    pub transform: DomainTransform,
}

impl DomainSpec {
    pub fn new(domain_id: impl Into<String>, transform: DomainTransform) -> Result<Self> {
        let ok = match transform {
            DomainTransform::Identity => true,
            DomainTransform::AdditiveGaussian { sigma } => sigma >= 0.0 && sigma.is_finite(),
            DomainTransform::ContrastScale { c } => c > 0.0 && c.is_finite(),
            DomainTransform::PixelDropout { rate } => (0.0..1.0).contains(&rate),
            DomainTransform::Smooth { window } => window >= 1,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("domain parameters out of range: {transform:?}")));
        }
        Ok(Self { domain_id: domain_id.into(), transform })
    }
}

/// Nineteen domains: the clean inputs plus sweeps over the four corruption
/// families.
pub fn default_domains() -> Vec<DomainSpec> {
    let mut v = vec![DomainSpec::new("identity", DomainTransform::Identity).unwrap()];
    for sigma in [0.1, 0.25, 0.5, 1.0] {
        v.push(DomainSpec::new(format!("gaussian-{sigma}"), DomainTransform::AdditiveGaussian { sigma }).unwrap());
    }
    for c in [0.25, 0.5, 2.0, 4.0] {
        v.push(DomainSpec::new(format!("contrast-{c}"), DomainTransform::ContrastScale { c }).unwrap());
    }
    for rate in [0.05, 0.1, 0.2, 0.3, 0.5] {
        v.push(DomainSpec::new(format!("dropout-{rate}"), DomainTransform::PixelDropout { rate }).unwrap());
    }
    for window in [2, 3, 5, 7, 9] {
        v.push(DomainSpec::new(format!("smooth-{window}"), DomainTransform::Smooth { window }).unwrap());
    }
    v
}

pub fn apply_domain(inputs: &RepMatrix, spec: &DomainSpec, seed: u64) -> Result<RepMatrix> {
    let x = inputs.data();
    let mut r = rng(seed);
    let out = match spec.transform {
        DomainTransform::Identity => x.to_owned(),
        DomainTransform::AdditiveGaussian { sigma } => {
            if sigma == 0.0 {
                x.to_owned()
            } else {
                let normal = Normal::new(0.0, sigma).expect("validated sigma");
                x.mapv(|v| v + normal.sample(&mut r))
            }
        }
        DomainTransform::ContrastScale { c } => x.mapv(|v| v * c),
        DomainTransform::PixelDropout { rate } => {
            if rate == 0.0 {
                x.to_owned()
            } else {
                x.mapv(|v| if r.random::<f64>() < rate { 0.0 } else { v })
            }
        }
        DomainTransform::Smooth { window } => {
            let p = x.ncols();
            let lo = (window - 1) / 2;
            let hi = window - 1 - lo;
            Array2::from_shape_fn(x.raw_dim(), |(i, j)| {
                let a = j.saturating_sub(lo);
                let b = (j + hi).min(p - 1);
                let s: f64 = (a..=b).map(|k| x[[i, k]]).sum();
                s / (b - a + 1) as f64
            })
        }
    };
    RepMatrix::raw(out)
}
