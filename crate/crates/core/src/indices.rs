//! Second-level similarity indices between RSMs.
//!
//! Every index here reduces to a cosine between two centered vectors:
//! CKA compares doubly-centered kernels `HKH` (since
//! `tr(K₁HK₂H) = ⟨HK₁H, HK₂H⟩_F`), RSA compares mean-centered (ranked)
//! upper triangles. A [`PreparedRsm`] caches that centered vector so many
//! pairs can be scored without redoing regressions or eigendecompositions.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::deconfound::{adjust, adjust_at_depth, psd_repair, DeconfoundedRsm};
use crate::error::{Error, Result};
use crate::numerics::rank_with_ties;
use crate::rsm::{triu, Rsm, RsmKind};
use crate::scalar::Scalar;

/// Smallest n accepted by any index.
pub const MIN_EXAMPLES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cka,
    Dcka,
    Rdcka,
    RsaSpearman,
    RsaPearson,
    Drsa,
    Rdrsa,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Cka,
        Metric::Dcka,
        Metric::Rdcka,
        Metric::RsaSpearman,
        Metric::RsaPearson,
        Metric::Drsa,
        Metric::Rdrsa,
    ];

    /// RSM kind the metric consumes.
    pub fn kind(self) -> RsmKind {
        match self {
            Metric::Cka | Metric::Dcka | Metric::Rdcka => RsmKind::Kernel,
            _ => RsmKind::SquaredDistance,
        }
    }

    pub fn is_deconfounded(self) -> bool {
        !matches!(self, Metric::Cka | Metric::RsaSpearman | Metric::RsaPearson)
    }

    pub fn is_recursive(self) -> bool {
        matches!(self, Metric::Rdcka | Metric::Rdrsa)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cka => "cka",
            Metric::Dcka => "dcka",
            Metric::Rdcka => "rdcka",
            Metric::RsaSpearman => "rsa_spearman",
            Metric::RsaPearson => "rsa_pearson",
            Metric::Drsa => "drsa",
            Metric::Rdrsa => "rdrsa",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsaVariant {
    Spearman,
    Pearson,
}

/// Why a score has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    /// A self-HSIC is numerically zero.
    Kernel,
    /// The confounder explains the RSM completely.
    Residual,
    /// The residual has no positive eigenvalues to keep.
    NoPositiveSpectrum,
    /// A compared triangle is constant.
    ConstantInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore<F> {
    pub metric: Metric,
    pub value: Option<F>,
    pub degenerate: bool,
    pub reason: Option<Degeneracy>,
    pub pair: (String, String),
}

impl<F: Scalar> SimilarityScore<F> {
    fn new(metric: Metric, value: std::result::Result<F, Degeneracy>, pair: (String, String)) -> Self {
        match value {
            Ok(v) => Self { metric, value: Some(v), degenerate: false, reason: None, pair },
            Err(r) => Self { metric, value: None, degenerate: true, reason: Some(r), pair },
        }
    }
}

/// The centering matrix `H = I − 11ᵀ/n`, applied without materializing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CenteringOperator {
    pub n: usize,
}

impl CenteringOperator {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    /// `H K H`: subtracts row and column means, adds back the grand mean.
    pub fn double_center<F: Scalar>(&self, k: ArrayView2<'_, F>) -> Array2<F> {
        let n = self.n;
        assert_eq!(k.dim(), (n, n), "centering operator size mismatch");
        let nf = F::from_usize_lossy(n);
        let row_means: Vec<F> = k.rows().into_iter().map(|r| r.sum() / nf).collect();
        let col_means: Vec<F> = k.columns().into_iter().map(|c| c.sum() / nf).collect();
        let grand = row_means.iter().copied().sum::<F>() / nf;
        Array2::from_shape_fn((n, n), |(i, j)| k[[i, j]] - row_means[i] - col_means[j] + grand)
    }

    /// `H v`.
    pub fn center<F: Scalar>(&self, v: &[F]) -> Vec<F> {
        let mean = v.iter().copied().sum::<F>() / F::from_usize_lossy(v.len());
        v.iter().map(|&x| x - mean).collect()
    }
}

fn check_pair<F: Scalar>(a: &Rsm<F>, b: &Rsm<F>, kind: RsmKind) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::ShapeMismatch(format!("RSMs with n={} and n={}", a.n(), b.n())));
    }
    if a.kind() != kind || b.kind() != kind {
        return Err(Error::KindMismatch);
    }
    if a.n() < MIN_EXAMPLES {
        return Err(Error::TooFewExamples { needed: MIN_EXAMPLES, got: a.n() });
    }
    Ok(())
}

/// Empirical HSIC `tr(K₁HK₂H)/(n−1)²`.
pub fn hsic<F: Scalar>(k1: &Rsm<F>, k2: &Rsm<F>) -> Result<F> {
    check_pair(k1, k2, RsmKind::Kernel)?;
    Ok(hsic_matrices(k1.data(), k2.data()))
}

fn hsic_matrices<F: Scalar>(k1: ArrayView2<'_, F>, k2: ArrayView2<'_, F>) -> F {
    let n = k1.nrows();
    let h = CenteringOperator::new(n);
    let c1 = h.double_center(k1);
    // tr(K₁HK₂H) = Σ_ij (HK₁H)_ij (K₂)_ji
    let t: F = c1.iter().zip(k2.t().iter()).map(|(&a, &b)| a * b).sum();
    let nm1 = F::from_usize_lossy(n - 1);
    t / (nm1 * nm1)
}

/// An RSM reduced to the centered vector its index compares.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRsm<F> {
    pub metric: Metric,
    pub n: usize,
    pub source: String,
    centered: Vec<F>,
    norm: F,
    degenerate: Option<Degeneracy>,
}

impl<F: Scalar> PreparedRsm<F> {
    pub fn degeneracy(&self) -> Option<Degeneracy> {
        self.degenerate
    }

    /// A placeholder that scores as degenerate against anything.
    pub fn flagged(metric: Metric, n: usize, source: &str, why: Degeneracy) -> Self {
        Self::degenerate(metric, n, source, why)
    }

    fn from_kernel(metric: Metric, k: ArrayView2<'_, F>, source: &str) -> Self {
        let n = k.nrows();
        let centered: Vec<F> = CenteringOperator::new(n).double_center(k).into_iter().collect();
        let norm = centered.iter().map(|&v| v * v).sum::<F>().sqrt();
        // Relative test: CKA ignores kernel scale, and PSD repair can shrink
        // a residual by an arbitrary factor ρ².
        let knorm = k.iter().map(|&v| v * v).sum::<F>().sqrt();
        let nm1 = F::from_usize_lossy(n - 1);
        let self_hsic = norm * norm / (nm1 * nm1);
        let floor = F::DEGENERATE_HSIC * (knorm / nm1) * (knorm / nm1);
        let degenerate = (knorm == F::zero() || self_hsic <= floor).then_some(Degeneracy::Kernel);
        Self { metric, n, source: source.to_string(), centered, norm, degenerate }
    }

    fn from_triangle(metric: Metric, tri: Vec<F>, ranked: bool, n: usize, source: &str) -> Self {
        if tri.iter().all(|&v| v == tri[0]) {
            return Self::degenerate(metric, n, source, Degeneracy::ConstantInput);
        }
        let values = if ranked { rank_with_ties(&tri) } else { tri };
        let centered = CenteringOperator::new(n).center(&values);
        let norm = centered.iter().map(|&v| v * v).sum::<F>().sqrt();
        Self { metric, n, source: source.to_string(), centered, norm, degenerate: None }
    }

    fn degenerate(metric: Metric, n: usize, source: &str, why: Degeneracy) -> Self {
        Self { metric, n, source: source.to_string(), centered: Vec::new(), norm: F::zero(), degenerate: Some(why) }
    }

    fn from_residual(metric: Metric, d: DeconfoundedRsm<F>) -> Result<Self> {
        let n = d.residual.nrows();
        if d.is_fully_explained() {
            return Ok(Self::degenerate(metric, n, &d.source, Degeneracy::Residual));
        }
        match metric.kind() {
            RsmKind::Kernel => match psd_repair(&d) {
                Ok(r) => Ok(Self::from_kernel(metric, r.repaired.view(), &d.source)),
                Err(Error::NoPositiveSpectrum) => {
                    Ok(Self::degenerate(metric, n, &d.source, Degeneracy::NoPositiveSpectrum))
                }
                Err(e) => Err(e),
            },
            RsmKind::SquaredDistance => Ok(Self::from_triangle(metric, triu(d.residual.view()), true, n, &d.source)),
        }
    }
}

/// Prepares layer `depth` (1-based) of a model's RSM stack for `metric`.
///
/// Non-recursive metrics only look at `layers[depth-1]` and `k0`;
/// recursive ones adjust against the previous layer (or `k0` at depth 1).
pub fn prepare<F: Scalar>(metric: Metric, layers: &[Rsm<F>], k0: &Rsm<F>, depth: usize) -> Result<PreparedRsm<F>> {
    if depth == 0 || depth > layers.len() {
        return Err(Error::InvalidParameter(format!("depth {depth} outside 1..={}", layers.len())));
    }
    let k = &layers[depth - 1];
    let kind = metric.kind();
    if k.kind() != kind || k0.kind() != kind {
        return Err(Error::KindMismatch);
    }
    if k.n() != k0.n() {
        return Err(Error::ShapeMismatch(format!("RSM n={} vs confounder n={}", k.n(), k0.n())));
    }
    if k.n() < MIN_EXAMPLES {
        return Err(Error::TooFewExamples { needed: MIN_EXAMPLES, got: k.n() });
    }
    match metric {
        Metric::Cka => Ok(PreparedRsm::from_kernel(metric, k.data(), k.source())),
        Metric::RsaSpearman => Ok(PreparedRsm::from_triangle(metric, k.triu(), true, k.n(), k.source())),
        Metric::RsaPearson => Ok(PreparedRsm::from_triangle(metric, k.triu(), false, k.n(), k.source())),
        Metric::Dcka | Metric::Drsa => PreparedRsm::from_residual(metric, adjust(k, k0)?),
        Metric::Rdcka | Metric::Rdrsa => PreparedRsm::from_residual(metric, adjust_at_depth(layers, k0, depth)?),
    }
}

/// Prepares a single RSM (depth 1).
pub fn prepare_one<F: Scalar>(metric: Metric, k: &Rsm<F>, k0: &Rsm<F>) -> Result<PreparedRsm<F>> {
    prepare(metric, std::slice::from_ref(k), k0, 1)
}

/// Scores two prepared RSMs of the same metric.
pub fn score<F: Scalar>(a: &PreparedRsm<F>, b: &PreparedRsm<F>) -> Result<SimilarityScore<F>> {
    if a.metric != b.metric {
        return Err(Error::InvalidParameter(format!("cannot compare {} with {}", a.metric, b.metric)));
    }
    if a.n != b.n {
        return Err(Error::ShapeMismatch(format!("RSMs with n={} and n={}", a.n, b.n)));
    }
    let pair = (a.source.clone(), b.source.clone());
    let value = match (a.degenerate, b.degenerate) {
        (Some(r), _) | (None, Some(r)) => Err(r),
        (None, None) => {
            let dot: F = a.centered.iter().zip(&b.centered).map(|(&x, &y)| x * y).sum();
            Ok((dot / (a.norm * b.norm)).max(-F::one()).min(F::one()))
        }
    };
    Ok(SimilarityScore::new(a.metric, value, pair))
}

fn placeholder_confounder<F: Scalar>(k: &Rsm<F>) -> &Rsm<F> {
    // non-deconfounded metrics never read the confounder
    k
}

/// `HSIC₁₂ / √(HSIC₁₁·HSIC₂₂)`.
pub fn cka<F: Scalar>(k1: &Rsm<F>, k2: &Rsm<F>) -> Result<SimilarityScore<F>> {
    check_pair(k1, k2, RsmKind::Kernel)?;
    score(
        &prepare_one(Metric::Cka, k1, placeholder_confounder(k1))?,
        &prepare_one(Metric::Cka, k2, placeholder_confounder(k2))?,
    )
}

/// CKA between the PSD-repaired residuals of `k1` and `k2` after
/// regressing out `k0`.
pub fn dcka<F: Scalar>(k1: &Rsm<F>, k2: &Rsm<F>, k0: &Rsm<F>) -> Result<SimilarityScore<F>> {
    check_pair(k1, k2, RsmKind::Kernel)?;
    score(&prepare_one(Metric::Dcka, k1, k0)?, &prepare_one(Metric::Dcka, k2, k0)?)
}

/// Correlation of the strict upper triangles of two distance RSMs.
pub fn rsa<F: Scalar>(d1: &Rsm<F>, d2: &Rsm<F>, variant: RsaVariant) -> Result<SimilarityScore<F>> {
    check_pair(d1, d2, RsmKind::SquaredDistance)?;
    let metric = match variant {
        RsaVariant::Spearman => Metric::RsaSpearman,
        RsaVariant::Pearson => Metric::RsaPearson,
    };
    score(
        &prepare_one(metric, d1, placeholder_confounder(d1))?,
        &prepare_one(metric, d2, placeholder_confounder(d2))?,
    )
}

/// Spearman correlation of the residual upper triangles; no PSD repair.
pub fn drsa<F: Scalar>(d1: &Rsm<F>, d2: &Rsm<F>, d0: &Rsm<F>) -> Result<SimilarityScore<F>> {
    check_pair(d1, d2, RsmKind::SquaredDistance)?;
    score(&prepare_one(Metric::Drsa, d1, d0)?, &prepare_one(Metric::Drsa, d2, d0)?)
}

/// Recursive variants: layer `depth` of each model adjusted against its own
/// previous layer (depth 1 against that model's input RSM).
#[allow(clippy::too_many_arguments)]
pub fn recursive_index<F: Scalar>(
    metric: Metric,
    layers_a: &[Rsm<F>],
    layers_b: &[Rsm<F>],
    k0_a: &Rsm<F>,
    k0_b: &Rsm<F>,
    depth_a: usize,
    depth_b: usize,
) -> Result<SimilarityScore<F>> {
    if !metric.is_recursive() {
        return Err(Error::InvalidParameter(format!("{metric} is not a recursive metric")));
    }
    score(&prepare(metric, layers_a, k0_a, depth_a)?, &prepare(metric, layers_b, k0_b, depth_b)?)
}
