//! Dense symmetric eigendecomposition.
//!
//! Two solvers are provided. The default reduces the matrix to tridiagonal
//! form with Householder reflections and then runs the implicit QL
//! iteration with Wilkinson-style shifts (the classic `tred2`/`tql2` pair).
//! Cyclic Jacobi rotations are available as an alternative; they are slower
//! by a sizeable constant but need nothing beyond plane rotations.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sweep cap for the Jacobi solver.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Per-eigenvalue iteration cap for the QL solver.
pub const QL_MAX_ITER: usize = 60;

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem<F> {
    pub eigenvalues: Array1<F>,
    pub eigenvectors: Array2<F>,
}

impl<F: Scalar> EigenSystem<F> {
    /// Rebuilds `Q diag(f(λ)) Qᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(F) -> F) -> Array2<F> {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(j).mapv_inplace(|v| v * w);
        }
        let out = scaled.dot(&self.eigenvectors.t());
        debug_assert_eq!(out.dim(), (n, n));
        out
    }

    pub fn reconstruct(&self) -> Array2<F> {
        self.reconstruct_with(|l| l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    #[default]
    HouseholderQl,
    Jacobi,
}

/// Symmetric eigendecomposition with the default solver.
///
/// The input is symmetrized as `(S + Sᵀ)/2` before decomposition.
pub fn sym_eig<F: Scalar>(s: ArrayView2<F>) -> Result<EigenSystem<F>> {
    sym_eig_with(s, EigenMethod::default())
}

pub fn sym_eig_with<F: Scalar>(s: ArrayView2<F>, method: EigenMethod) -> Result<EigenSystem<F>> {
    let (n, m) = s.dim();
    if n != m {
        return Err(Error::ShapeMismatch(format!("eigendecomposition of {n}x{m} matrix")));
    }
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let half = F::lit(0.5);
    let sym = Array2::from_shape_fn((n, n), |(i, j)| (s[[i, j]] + s[[j, i]]) * half);
    let (vals, vecs) = match method {
        EigenMethod::HouseholderQl => householder_ql(sym)?,
        EigenMethod::Jacobi => jacobi(sym)?,
    };
    Ok(sorted_descending(vals, vecs))
}

fn sorted_descending<F: Scalar>(vals: Vec<F>, vecs: Array2<F>) -> EigenSystem<F> {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = order.iter().map(|&k| vals[k]).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(i, j)| vecs[[i, order[j]]]);
    EigenSystem { eigenvalues, eigenvectors }
}

/// Householder tridiagonalization followed by implicit QL.
fn householder_ql<F: Scalar>(a: Array2<F>) -> Result<(Vec<F>, Array2<F>)> {
    let n = a.nrows();
    if n == 1 {
        return Ok((vec![a[[0, 0]]], Array2::eye(1)));
    }
    let mut v = a;
    let mut d = vec![F::zero(); n];
    let mut e = vec![F::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    Ok((d, v))
}

fn tred2<F: Scalar>(v: &mut Array2<F>, d: &mut [F], e: &mut [F]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }
    for i in (1..n).rev() {
        let mut scale = F::zero();
        let mut h = F::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == F::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = F::zero();
                v[[j, i]] = F::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > F::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = F::zero();
            }
            for j in 0..i {
                f = d[j];
                v[[j, i]] = f;
                g = e[j] + v[[j, j]] * f;
                for k in (j + 1)..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            f = F::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[[k, j]] -= upd;
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = F::zero();
            }
        }
        d[i] = h;
    }

    // Accumulate the transformations.
    for i in 0..n - 1 {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = F::one();
        let h = d[i + 1];
        if h != F::zero() {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = F::zero();
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[[k, j]] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = F::zero();
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = F::zero();
    }
    v[[n - 1, n - 1]] = F::one();
    e[0] = F::zero();
}

fn tql2<F: Scalar>(v: &mut Array2<F>, d: &mut [F], e: &mut [F]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = F::zero();

    let two = F::lit(2.0);
    let eps = F::epsilon();
    let mut f = F::zero();
    let mut tst1 = F::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::NoConvergence(QL_MAX_ITER));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(F::one());
                if p < F::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = F::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = F::zero();
                let mut s2 = F::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let vk1 = v[[k, i + 1]];
                        let vk = v[[k, i]];
                        v[[k, i + 1]] = s * vk + c * vk1;
                        v[[k, i]] = c * vk - s * vk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = F::zero();
    }
    Ok(())
}

/// Cyclic Jacobi: sweep every off-diagonal pair until the off-diagonal
/// Frobenius norm falls below `JACOBI_TOL · ‖S‖_F`.
fn jacobi<F: Scalar>(mut a: Array2<F>) -> Result<(Vec<F>, Array2<F>)> {
    let n = a.nrows();
    let mut v = Array2::<F>::eye(n);
    let frob = a.iter().map(|&x| x * x).sum::<F>().sqrt();
    let target = F::JACOBI_TOL * frob;
    let two = F::lit(2.0);

    let off_norm = |a: &Array2<F>| {
        let mut s = F::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[[i, j]] * a[[i, j]];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&a) > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(JACOBI_MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == F::zero() {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(((0..n).map(|i| a[[i, i]]).collect(), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        &a + &a.t()
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    fn check(s: &Array2<f64>, method: EigenMethod) {
        let es = sym_eig_with(s.view(), method).unwrap();
        let n = s.nrows();
        let qtq = es.eigenvectors.t().dot(&es.eigenvectors) - Array2::<f64>::eye(n);
        assert!(max_abs(&qtq) <= 1e-9, "orthonormality {}", max_abs(&qtq));
        let rec = es.reconstruct() - s;
        assert!(max_abs(&rec) <= 1e-8 * max_abs(s).max(1.0));
        let tr: f64 = (0..n).map(|i| s[[i, i]]).sum();
        assert!((es.eigenvalues.sum() - tr).abs() <= 1e-8 * tr.abs().max(1.0));
        assert!(es.eigenvalues.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }

    #[test]
    fn identity_and_zero() {
        for method in [EigenMethod::HouseholderQl, EigenMethod::Jacobi] {
            let es = sym_eig_with(Array2::<f64>::eye(2).view(), method).unwrap();
            assert_eq!(es.eigenvalues.to_vec(), vec![1.0, 1.0]);
            let es = sym_eig_with(Array2::<f64>::zeros((2, 2)).view(), method).unwrap();
            assert_eq!(es.eigenvalues.to_vec(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let s = array![[1.0f64, 2.0], [2.0, 1.0]];
        for method in [EigenMethod::HouseholderQl, EigenMethod::Jacobi] {
            let es = sym_eig_with(s.view(), method).unwrap();
            assert!((es.eigenvalues[0] - 3.0).abs() < 1e-14);
            assert!((es.eigenvalues[1] + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reconstruction_on_random_matrices() {
        for (k, n) in [1usize, 2, 3, 5, 8, 17, 33, 64].into_iter().enumerate() {
            let s = random_symmetric(n, k as u64);
            check(&s, EigenMethod::HouseholderQl);
            check(&s, EigenMethod::Jacobi);
        }
    }

    #[test]
    fn repeated_and_rank_deficient_spectra() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i * (j + 1)) as f64 / 10.0);
        let s = x.dot(&x.t());
        check(&s, EigenMethod::HouseholderQl);
        check(&s, EigenMethod::Jacobi);
        let mut blocky = Array2::<f64>::eye(6) * 2.0;
        blocky[[0, 0]] = 5.0;
        check(&blocky, EigenMethod::HouseholderQl);
    }

    #[test]
    fn solvers_agree_on_eigenvalues() {
        let s = random_symmetric(20, 99);
        let a = sym_eig_with(s.view(), EigenMethod::HouseholderQl).unwrap();
        let b = sym_eig_with(s.view(), EigenMethod::Jacobi).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(b.eigenvalues.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn single_precision_runs() {
        let s = array![[2.0f32, 1.0], [1.0, 2.0]];
        let es = sym_eig(s.view()).unwrap();
        assert!((es.eigenvalues[0] - 3.0).abs() < 1e-5);
        assert!((es.eigenvalues[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn non_square_is_rejected() {
        let s = Array2::<f64>::zeros((2, 3));
        assert!(matches!(sym_eig(s.view()), Err(Error::ShapeMismatch(_))));
    }
}
