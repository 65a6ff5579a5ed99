//! Least-squares fits: the through-origin coefficient used for deconfounding
//! and intercept polynomials scored by BIC for confounder diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Floor applied to the residual sum of squares before taking its log.
pub const RSS_FLOOR: f64 = 1e-300;

/// Intercept polynomial fit `y ≈ c₀ + c₁x + … + c_q x^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit<F> {
    pub order: usize,
    /// Intercept first, then the coefficients of x¹..x^order.
    pub coefficients: Vec<F>,
    pub rss: F,
    pub r_squared: F,
    pub bic: F,
}

/// `α̂ = Σxᵢyᵢ / Σxᵢ²`.
pub fn ols_through_origin<F: Scalar>(y: &[F], x: &[F]) -> Result<F> {
    if y.len() != x.len() {
        return Err(Error::ShapeMismatch(format!("y has {} values, x has {}", y.len(), x.len())));
    }
    if x.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let xx: F = x.iter().map(|&v| v * v).sum();
    if xx == F::zero() {
        return Err(Error::SingularDesign);
    }
    let xy: F = x.iter().zip(y).map(|(&a, &b)| a * b).sum();
    Ok(xy / xx)
}

/// Fits a polynomial with intercept and reports R² and the Gaussian BIC
/// `N·ln(max(RSS, floor)/N) + (order+1)·ln N`, where the floor is the larger
/// of 1e-300 and the rounding-level RSS `N·(100·ε·√N·max|y|)²`.
pub fn polyfit_bic<F: Scalar>(y: &[F], x: &[F], order: usize) -> Result<PolyFit<F>> {
    if order == 0 {
        return Err(Error::InvalidParameter("polynomial order must be at least 1".into()));
    }
    if y.len() != x.len() {
        return Err(Error::ShapeMismatch(format!("y has {} values, x has {}", y.len(), x.len())));
    }
    let n = y.len();
    if n < order + 2 {
        return Err(Error::TooFewValues { needed: order + 2, got: n });
    }
    let k = order + 1;
    // Column-major design with powers of x.
    let mut cols: Vec<Vec<F>> = Vec::with_capacity(k);
    cols.push(vec![F::one(); n]);
    for q in 1..=order {
        let prev = &cols[q - 1];
        let next: Vec<F> = prev.iter().zip(x).map(|(&p, &xi)| p * xi).collect();
        cols.push(next);
    }
    let coefficients = solve_least_squares(&cols, y)?;

    let mut rss = F::zero();
    for i in 0..n {
        let mut fit = F::zero();
        for (c, col) in coefficients.iter().zip(&cols) {
            fit += *c * col[i];
        }
        let r = y[i] - fit;
        rss += r * r;
    }
    let nf = F::from_usize_lossy(n);
    let mean = y.iter().copied().sum::<F>() / nf;
    let tss: F = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let r_squared = if tss > F::zero() {
        (F::one() - rss / tss).max(F::zero()).min(F::one())
    } else {
        F::one()
    };
    // Residuals at round-off level count as an exact fit, so a perfect
    // low-order model is not beaten by a higher order's smaller rounding.
    let ymax = y.iter().fold(F::zero(), |m, &v| m.max(v.abs()));
    let roundoff = F::lit(100.0) * F::epsilon() * nf.sqrt() * ymax;
    let floor = F::lit(RSS_FLOOR).max(F::min_positive_value()).max(nf * roundoff * roundoff);
    let bic = nf * (rss.max(floor) / nf).ln() + F::from_usize_lossy(k) * nf.ln();
    Ok(PolyFit { order, coefficients, rss, r_squared, bic })
}

/// Householder QR least squares on column-scaled design; returns the
/// unscaled coefficients.
fn solve_least_squares<F: Scalar>(cols: &[Vec<F>], y: &[F]) -> Result<Vec<F>> {
    let k = cols.len();
    let n = y.len();
    let mut scales = Vec::with_capacity(k);
    let mut a: Vec<Vec<F>> = Vec::with_capacity(k);
    for col in cols {
        let s = col.iter().fold(F::zero(), |m, &v| m.max(v.abs()));
        if s == F::zero() {
            return Err(Error::RankDeficient);
        }
        scales.push(s);
        a.push(col.iter().map(|&v| v / s).collect());
    }
    let mut b = y.to_vec();
    let mut diag = vec![F::zero(); k];
    for j in 0..k {
        let norm = a[j][j..].iter().map(|&v| v * v).sum::<F>().sqrt();
        if norm == F::zero() {
            return Err(Error::RankDeficient);
        }
        let alpha = if a[j][j] > F::zero() { -norm } else { norm };
        // v = a_j[j..] - alpha e_1
        let mut v: Vec<F> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: F = v.iter().map(|&t| t * t).sum();
        diag[j] = alpha;
        if vnorm2 > F::zero() {
            let two = F::lit(2.0);
            for col in a.iter_mut().skip(j + 1) {
                let dot: F = v.iter().zip(&col[j..]).map(|(&p, &q)| p * q).sum();
                let f = two * dot / vnorm2;
                for (c, &vi) in col[j..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            let dot: F = v.iter().zip(&b[j..]).map(|(&p, &q)| p * q).sum();
            let f = two * dot / vnorm2;
            for (c, &vi) in b[j..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
        a[j][j] = alpha;
    }
    let rmax = diag.iter().fold(F::zero(), |m, &d| m.max(d.abs()));
    let tol = F::lit(100.0) * F::epsilon() * F::from_usize_lossy(n).sqrt() * rmax;
    if diag.iter().any(|d| d.abs() <= tol) {
        return Err(Error::RankDeficient);
    }
    let mut coef = vec![F::zero(); k];
    for j in (0..k).rev() {
        let mut s = b[j];
        for (i, c) in coef.iter().enumerate().skip(j + 1) {
            s -= a[i][j] * *c;
        }
        coef[j] = s / diag[j];
    }
    Ok(coef.into_iter().zip(scales).map(|(c, s)| c / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn through_origin_exact_multiple() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        assert_eq!(ols_through_origin(&y, &x).unwrap(), 2.0);
    }

    #[test]
    fn through_origin_hand_value() {
        let a = ols_through_origin(&[1.0f64, 1.0], &[1.0, 2.0]).unwrap();
        assert!((a - 0.6).abs() < 1e-15);
    }

    #[test]
    fn through_origin_singular() {
        assert!(matches!(ols_through_origin(&[1.0, 2.0], &[0.0, 0.0]), Err(Error::SingularDesign)));
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let f1 = polyfit_bic(&y, &x, 1).unwrap();
        assert!((f1.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((f1.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((f1.r_squared - 1.0).abs() < 1e-12);
        let f2 = polyfit_bic(&y, &x, 2).unwrap();
        assert!((f2.r_squared - 1.0).abs() < 1e-12);
        assert!(f2.bic > f1.bic);
    }

    #[test]
    fn symmetric_parabola_has_no_slope() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let f = polyfit_bic(&y, &x, 1).unwrap();
        assert!((f.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(f.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn r_squared_grows_with_order() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v.exp() + 0.01 * (i as f64).cos()).collect();
        let mut last = 0.0;
        for q in 1..=4 {
            let f = polyfit_bic(&y, &x, q).unwrap();
            assert!(f.r_squared + 1e-12 >= last);
            assert!(f.bic.is_finite());
            last = f.r_squared;
        }
    }

    #[test]
    fn binary_regressor_is_rank_deficient_at_order_two() {
        let x = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let y = [0.1, 1.0, 0.2, 0.9, 1.1, 0.0];
        assert!(polyfit_bic(&y, &x, 1).is_ok());
        assert!(matches!(polyfit_bic(&y, &x, 2), Err(Error::RankDeficient)));
    }

    #[test]
    fn preconditions() {
        assert!(matches!(polyfit_bic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(polyfit_bic(&[1.0, 2.0], &[1.0, 2.0], 1), Err(Error::TooFewValues { .. })));
    }
}
