use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Durbin–Watson statistic `Σ(eₜ − eₜ₋₁)² / Σeₜ²`, always in [0, 4].
pub fn durbin_watson<F: Scalar>(e: &[F]) -> Result<F> {
    if e.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: e.len() });
    }
    let den: F = e.iter().map(|&x| x * x).sum();
    if den == F::zero() {
        return Err(Error::DegenerateInput("all-zero residuals"));
    }
    let num: F = e.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok(num / den)
}

/// Sample mean and its standard error (sample sd with M−1, divided by √M).
pub fn mean_stderr<F: Scalar>(values: &[F]) -> Result<(F, F)> {
    let m = values.len();
    if m < 2 {
        return Err(Error::TooFewValues { needed: 2, got: m });
    }
    let mf = F::from_usize_lossy(m);
    let mean = values.iter().copied().sum::<F>() / mf;
    let ss: F = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (mf - F::one())).sqrt();
    Ok((mean, sd / mf.sqrt()))
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile<F: Scalar>(values: &[F], q: f64) -> Result<F> {
    if values.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = F::lit(pos - lo as f64);
    Ok(v[lo] + (v[hi] - v[lo]) * w)
}
