//! Brute-force reference implementations used as test oracles. Everything
//! here is written against plain `Vec`s and shares no code with the crate.

#![allow(dead_code)]

pub type Mat = Vec<Vec<f64>>;

pub fn from_array(a: ndarray::ArrayView2<'_, f64>) -> Mat {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn to_array(m: &Mat) -> ndarray::Array2<f64> {
    let (r, c) = (m.len(), m[0].len());
    ndarray::Array2::from_shape_fn((r, c), |(i, j)| m[i][j])
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            out[i][j] = (0..k).map(|t| a[i][t] * b[t][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Column-centers, then divides by the Frobenius norm.
pub fn preprocess(x: &Mat) -> Mat {
    let (n, p) = (x.len(), x[0].len());
    let means: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let c: Mat = x.iter().map(|r| r.iter().zip(&means).map(|(v, m)| v - m).collect()).collect();
    let norm = c.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    c.iter().map(|r| r.iter().map(|v| v / norm).collect()).collect()
}

pub fn gram(x: &Mat) -> Mat {
    matmul(x, &transpose(x))
}

pub fn sq_dist(x: &Mat) -> Mat {
    let n = x.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    }
    d
}

/// Through-origin coefficient of vec(y) on vec(x) from the 1×1 normal equations.
pub fn vec_regression(y: &Mat, x: &Mat) -> f64 {
    let xtx: f64 = x.iter().flatten().map(|v| v * v).sum();
    let xty: f64 = x.iter().flatten().zip(y.iter().flatten()).map(|(a, b)| a * b).sum();
    xty / xtx
}

pub fn residual(y: &Mat, x: &Mat) -> Mat {
    let a = vec_regression(y, x);
    y.iter().zip(x).map(|(ry, rx)| ry.iter().zip(rx).map(|(u, v)| u - a * v).collect()).collect()
}

/// Cyclic Jacobi eigendecomposition; returns (eigenvalues, eigenvectors as columns).
pub fn jacobi_eig(s: &Mat) -> (Vec<f64>, Mat) {
    let n = s.len();
    let mut a = s.clone();
    let mut v: Mat = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let scale = s.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - sn * vkq;
                    v[k][q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// ρ²QΛ₊Qᵀ with ρ = |tr Λ| / tr Λ₊; PSD input is returned as is.
pub fn psd_repair(m: &Mat) -> (Mat, f64) {
    let n = m.len();
    let (lam, q) = jacobi_eig(m);
    if lam.iter().all(|&l| l >= 0.0) {
        return (m.clone(), 1.0);
    }
    let tr: f64 = lam.iter().sum();
    let pos: f64 = lam.iter().map(|l| l.max(0.0)).sum();
    let rho = tr.abs() / pos;
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..n).map(|k| rho * rho * lam[k].max(0.0) * q[i][k] * q[j][k]).sum();
        }
    }
    (out, rho)
}

pub fn centering(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64).collect()).collect()
}

/// tr(K H L H) / (n−1)².
pub fn hsic(k: &Mat, l: &Mat) -> f64 {
    let n = k.len();
    let h = centering(n);
    let m = matmul(&matmul(&matmul(k, &h), l), &h);
    (0..n).map(|i| m[i][i]).sum::<f64>() / ((n - 1) as f64).powi(2)
}

pub fn cka(k: &Mat, l: &Mat) -> f64 {
    hsic(k, l) / (hsic(k, k) * hsic(l, l)).sqrt()
}

pub fn dcka(k1: &Mat, k2: &Mat, k0: &Mat) -> f64 {
    cka(&psd_repair(&residual(k1, k0)).0, &psd_repair(&residual(k2, k0)).0)
}

pub fn upper(m: &Mat) -> Vec<f64> {
    let n = m.len();
    (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| m[i][j]).collect()
}

/// 1-based ranks, ties share the average of their positions.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// τ_b from explicit pair counting.
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut conc, mut disc, mut tie_a, mut tie_b) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 && db == 0.0 {
                continue;
            } else if da == 0.0 {
                tie_a += 1.0;
            } else if db == 0.0 {
                tie_b += 1.0;
            } else if da * db > 0.0 {
                conc += 1.0;
            } else {
                disc += 1.0;
            }
        }
    }
    (conc - disc) / ((conc + disc + tie_a) * (conc + disc + tie_b)).sqrt()
}

pub fn rsa_spearman(d1: &Mat, d2: &Mat) -> f64 {
    spearman(&upper(d1), &upper(d2))
}

pub fn drsa(d1: &Mat, d2: &Mat, d0: &Mat) -> f64 {
    spearman(&upper(&residual(d1, d0)), &upper(&residual(d2, d0)))
}

/// Random orthonormal matrix: modified Gram–Schmidt on a Gaussian matrix.
pub fn orthonormal(g: &Mat) -> Mat {
    let p = g.len();
    let mut cols: Vec<Vec<f64>> = transpose(g);
    for j in 0..p {
        for k in 0..j {
            let d: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
            let ck = cols[k].clone();
            cols[j].iter_mut().zip(&ck).for_each(|(a, b)| *a -= d * b);
        }
        let nrm = cols[j].iter().map(|a| a * a).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|a| *a /= nrm);
    }
    transpose(&cols)
}
