//! Regressing a confounder RSM out of representation RSMs.
//!
//! Each RSM is fitted through the origin against the confounder over all n²
//! entries, `α̂ = ⟨vec K⁰, vec K⟩ / ⟨vec K⁰, vec K⁰⟩`, and the residual
//! `K − α̂K⁰` replaces it. Residuals of kernel RSMs are generally indefinite;
//! [`psd_repair`] clips the negative spectrum and rescales the rest by the
//! trace ratio `ρ = |tr Λ| / tr Λ₊`, yielding `ρ²QΛ₊Qᵀ`.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{durbin_watson, polyfit_bic, sym_eig, PolyFit};
use crate::rsm::Rsm;
use crate::rsm::RsmKind;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfounderMode {
    /// Adjusted against the input-space RSM.
    InputConfounder,
    /// Adjusted against the previous layer's RSM.
    PreviousLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeconfoundedRsm<F> {
    pub residual: Array2<F>,
    pub alpha_hat: F,
    pub r_squared: F,
    pub mode: ConfounderMode,
    pub kind: RsmKind,
    pub source: String,
    /// ‖K‖_F of the RSM before adjustment.
    pub original_norm: F,
}

impl<F: Scalar> DeconfoundedRsm<F> {
    pub fn residual_norm(&self) -> F {
        frobenius(self.residual.view())
    }

    /// Whether the confounder explains the RSM entirely.
    pub fn is_fully_explained(&self) -> bool {
        self.residual_norm() <= F::RESIDUAL_REL_TOL * self.original_norm.max(F::min_positive_value())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdRepairResult<F> {
    pub repaired: Array2<F>,
    pub rho: F,
    /// tr(Λ₋), the magnitude of the discarded negative spectrum.
    pub clipped_mass: F,
}

pub(crate) fn frobenius<F: Scalar>(m: ArrayView2<'_, F>) -> F {
    m.iter().map(|&v| v * v).sum::<F>().sqrt()
}

fn inner<F: Scalar>(a: ArrayView2<'_, F>, b: ArrayView2<'_, F>) -> F {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

fn adjust_with_mode<F: Scalar>(k: &Rsm<F>, conf: &Rsm<F>, mode: ConfounderMode) -> Result<DeconfoundedRsm<F>> {
    if k.n() != conf.n() {
        return Err(Error::ShapeMismatch(format!("RSM n={} vs confounder n={}", k.n(), conf.n())));
    }
    if k.kind() != conf.kind() {
        return Err(Error::KindMismatch);
    }
    let c = conf.data();
    let kd = k.data();
    let cc = inner(c, c);
    if cc.sqrt() <= F::ZERO_NORM {
        return Err(Error::SingularConfounder);
    }
    let alpha_hat = inner(c, kd) / cc;
    let residual = Zip::from(&kd).and(&c).map_collect(|&a, &b| a - alpha_hat * b);

    let nn = F::from_usize_lossy(kd.len());
    let mean = kd.iter().copied().sum::<F>() / nn;
    let tss: F = kd.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let rss: F = residual.iter().map(|&v| v * v).sum();
    let r_squared = if tss > F::zero() {
        (F::one() - rss / tss).max(F::zero()).min(F::one())
    } else {
        F::one()
    };
    Ok(DeconfoundedRsm {
        residual,
        alpha_hat,
        r_squared,
        mode,
        kind: k.kind(),
        source: k.source().to_string(),
        original_norm: frobenius(kd),
    })
}

/// Regresses the input confounder `k0` out of `k`.
pub fn adjust<F: Scalar>(k: &Rsm<F>, k0: &Rsm<F>) -> Result<DeconfoundedRsm<F>> {
    adjust_with_mode(k, k0, ConfounderMode::InputConfounder)
}

/// Adjusts layer 1 against `k0` and every later layer against the
/// preceding layer's original (unadjusted) RSM.
pub fn recursive_adjust<F: Scalar>(layers: &[Rsm<F>], k0: &Rsm<F>) -> Result<Vec<DeconfoundedRsm<F>>> {
    if layers.is_empty() {
        return Err(Error::InvalidParameter("recursive adjustment needs at least one layer".into()));
    }
    layers
        .iter()
        .enumerate()
        .map(|(m, layer)| {
            if m == 0 {
                adjust_with_mode(layer, k0, ConfounderMode::PreviousLayer)
            } else {
                adjust_with_mode(layer, &layers[m - 1], ConfounderMode::PreviousLayer)
            }
        })
        .collect()
}

/// Adjusts one layer of a stack: depth 1 against `k0`, depth m against
/// layer m−1. `depth` is 1-based.
pub fn adjust_at_depth<F: Scalar>(layers: &[Rsm<F>], k0: &Rsm<F>, depth: usize) -> Result<DeconfoundedRsm<F>> {
    if depth == 0 || depth > layers.len() {
        return Err(Error::InvalidParameter(format!("depth {depth} outside 1..={}", layers.len())));
    }
    let conf = if depth == 1 { k0 } else { &layers[depth - 2] };
    adjust_with_mode(&layers[depth - 1], conf, ConfounderMode::PreviousLayer)
}

pub fn psd_repair<F: Scalar>(d: &DeconfoundedRsm<F>) -> Result<PsdRepairResult<F>> {
    psd_repair_matrix(d.residual.view())
}

/// Eigenvalue-clipping PSD approximation `ρ²QΛ₊Qᵀ`.
///
/// Matrices without a negative eigenvalue are returned unchanged with ρ = 1.
pub fn psd_repair_matrix<F: Scalar>(m: ArrayView2<'_, F>) -> Result<PsdRepairResult<F>> {
    let es = sym_eig(m)?;
    let trace: F = es.eigenvalues.iter().copied().sum();
    let pos: F = es.eigenvalues.iter().map(|&l| l.max(F::zero())).sum();
    let neg: F = es.eigenvalues.iter().map(|&l| (-l).max(F::zero())).sum();
    if pos <= F::ZERO_NORM {
        return Err(Error::NoPositiveSpectrum);
    }
    if neg == F::zero() {
        return Ok(PsdRepairResult { repaired: m.to_owned(), rho: F::one(), clipped_mass: F::zero() });
    }
    let rho = trace.abs() / pos;
    let rho2 = rho * rho;
    let mut repaired = es.reconstruct_with(|l| if l > F::zero() { rho2 * l } else { F::zero() });
    let n = repaired.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (repaired[[i, j]] + repaired[[j, i]]) * F::lit(0.5);
            repaired[[i, j]] = avg;
            repaired[[j, i]] = avg;
        }
    }
    Ok(PsdRepairResult { repaired, rho, clipped_mass: neg })
}

/// Polynomial fits of vec K on entrywise powers of vec K⁰ for orders
/// 1..=max_order, each scored by R² and BIC.
pub fn confounder_diagnostics<F: Scalar>(k: &Rsm<F>, k0: &Rsm<F>, max_order: usize) -> Result<Vec<PolyFit<F>>> {
    if max_order == 0 {
        return Err(Error::InvalidParameter("max_order must be at least 1".into()));
    }
    if k.n() != k0.n() {
        return Err(Error::ShapeMismatch(format!("RSM n={} vs confounder n={}", k.n(), k0.n())));
    }
    if k.kind() != k0.kind() {
        return Err(Error::KindMismatch);
    }
    let y: Vec<F> = k.data().iter().copied().collect();
    let x: Vec<F> = k0.data().iter().copied().collect();
    (1..=max_order).map(|q| polyfit_bic(&y, &x, q)).collect()
}

/// Durbin–Watson statistics of the residual rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDw<F> {
    pub per_row: Vec<F>,
    pub mean: F,
}

/// DW over each residual row in column order with the diagonal entry
/// skipped, then averaged over rows.
pub fn residual_dw<F: Scalar>(d: &DeconfoundedRsm<F>) -> Result<ResidualDw<F>> {
    let n = d.residual.nrows();
    if n < 3 {
        return Err(Error::TooFewExamples { needed: 3, got: n });
    }
    let per_row = (0..n)
        .map(|i| {
            let row: Vec<F> = (0..n).filter(|&j| j != i).map(|j| d.residual[[i, j]]).collect();
            durbin_watson(&row)
        })
        .collect::<Result<Vec<F>>>()?;
    let mean = per_row.iter().copied().sum::<F>() / F::from_usize_lossy(n);
    Ok(ResidualDw { per_row, mean })
}
