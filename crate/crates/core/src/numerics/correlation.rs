//! Rank statistics: average ranks, Pearson, Spearman and Kendall's tau-b.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pearson, Spearman and Kendall coefficients; any subset may be populated.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorrelationResult<F> {
    pub pearson_r: Option<F>,
    pub spearman_rho: Option<F>,
    pub kendall_tau: Option<F>,
}

fn cmp<F: Scalar>(a: &F, b: &F) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn rank_with_ties<F: Scalar>(v: &[F]) -> Vec<F> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| cmp(&v[a], &v[b]));
    let mut ranks = vec![F::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        // positions i..j (0-based) hold ranks i+1..=j
        let avg = F::from_usize_lossy(i + 1 + j) / F::lit(2.0);
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn check_pair<F>(a: &[F], b: &[F]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::TooFewValues { needed: 3, got: a.len() });
    }
    Ok(())
}

fn is_constant<F: Scalar>(v: &[F]) -> bool {
    v.iter().all(|&x| x == v[0])
}

fn clamp_unit<F: Scalar>(r: F) -> F {
    r.max(-F::one()).min(F::one())
}

pub fn pearson<F: Scalar>(a: &[F], b: &[F]) -> Result<F> {
    check_pair(a, b)?;
    if is_constant(a) || is_constant(b) {
        return Err(Error::DegenerateInput("constant vector"));
    }
    // centre as n·x − Σx: no rounded mean, so integer data stays exact
    let n = F::from_usize_lossy(a.len());
    let sa = a.iter().copied().sum::<F>();
    let sb = b.iter().copied().sum::<F>();
    let (mut sab, mut saa, mut sbb) = (F::zero(), F::zero(), F::zero());
    for (&x, &y) in a.iter().zip(b) {
        let dx = n * x - sa;
        let dy = n * y - sb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // sqrt of the product is exact for a = b; split only on overflow
    let prod = saa * sbb;
    let den = if prod.is_finite() && prod > F::zero() { prod.sqrt() } else { saa.sqrt() * sbb.sqrt() };
    Ok(clamp_unit(sab / den))
}

/// Pearson correlation of average ranks.
pub fn spearman<F: Scalar>(a: &[F], b: &[F]) -> Result<F> {
    check_pair(a, b)?;
    pearson(&rank_with_ties(a), &rank_with_ties(b))
}

/// Kendall's tau-b via Knight's O(N log N) merge-sort algorithm.
pub fn kendall_tau_b<F: Scalar>(a: &[F], b: &[F]) -> Result<F> {
    check_pair(a, b)?;
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| cmp(&a[i], &a[j]).then_with(|| cmp(&b[i], &b[j])));

    // Pairs tied in a, and tied jointly in (a, b).
    let (mut ties_a, mut ties_ab) = (0u64, 0u64);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && a[idx[j]] == a[idx[i]] {
            j += 1;
        }
        let t = (j - i) as u64;
        ties_a += t * (t - 1) / 2;
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && b[idx[l]] == b[idx[k]] {
                l += 1;
            }
            let u = (l - k) as u64;
            ties_ab += u * (u - 1) / 2;
            k = l;
        }
        i = j;
    }

    // Sorting by b now counts the discordant pairs as swaps.
    let mut ys: Vec<F> = idx.iter().map(|&k| b[k]).collect();
    let mut buf = ys.clone();
    let swaps = merge_count(&mut ys, &mut buf);

    let mut ties_b = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        ties_b += t * (t - 1) / 2;
        i = j;
    }

    let total = (n as u64) * (n as u64 - 1) / 2;
    let den_a = total - ties_a;
    let den_b = total - ties_b;
    if den_a == 0 || den_b == 0 {
        return Err(Error::DegenerateInput("zero tie-corrected denominator"));
    }
    // concordant - discordant = total - ties_a - ties_b + ties_ab - 2·discordant
    let num = total as i64 - ties_a as i64 - ties_b as i64 + ties_ab as i64 - 2 * swaps as i64;
    let num = F::from_i64(num).expect("pair count representable");
    let den = (F::from_u64(den_a).unwrap() * F::from_u64(den_b).unwrap()).sqrt();
    Ok(clamp_unit(num / den))
}

/// Stable merge sort returning the number of strict inversions.
fn merge_count<F: Scalar>(v: &mut [F], buf: &mut [F]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (lo, hi) = v.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        merge_count(lo, blo) + merge_count(hi, bhi)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// All three coefficients at once; degenerate inputs leave a field empty.
pub fn correlate<F: Scalar>(a: &[F], b: &[F]) -> Result<CorrelationResult<F>> {
    check_pair(a, b)?;
    Ok(CorrelationResult {
        pearson_r: pearson(a, b).ok(),
        spearman_rho: spearman(a, b).ok(),
        kendall_tau: kendall_tau_b(a, b).ok(),
    })
}
