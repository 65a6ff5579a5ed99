//! Activation matrices and the representational similarity matrices built
//! from them.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Symmetry tolerance for RSM construction.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixState {
    Raw,
    /// Columns centered, Frobenius norm 1.
    Preprocessed,
    /// Caller explicitly opted out of preprocessing; treated as ready for
    /// RSM construction without the centering/normalization invariant.
    Passthrough,
}

/// An n×p activation matrix, rows are examples.
#[derive(Debug, Clone, PartialEq)]
pub struct RepMatrix<F> {
    data: Array2<F>,
    state: MatrixState,
}

impl<F: Scalar> RepMatrix<F> {
    /// Wraps raw activations, rejecting empty or non-finite input.
    pub fn raw(data: Array2<F>) -> Result<Self> {
        validate(&data)?;
        Ok(Self { data, state: MatrixState::Raw })
    }

    /// Wraps activations that will feed RSMs unmodified.
    pub fn passthrough(data: Array2<F>) -> Result<Self> {
        validate(&data)?;
        Ok(Self { data, state: MatrixState::Passthrough })
    }

    pub fn data(&self) -> ArrayView2<'_, F> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<F> {
        self.data
    }

    pub fn state(&self) -> MatrixState {
        self.state
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// Same data, relabelled as passthrough.
    pub fn as_passthrough(&self) -> Self {
        Self { data: self.data.clone(), state: MatrixState::Passthrough }
    }

    /// Centers every column and divides by the Frobenius norm.
    pub fn preprocess(&self) -> Result<Self> {
        let n = self.nrows();
        if n < 2 {
            return Err(Error::TooFewExamples { needed: 2, got: n });
        }
        let means = self.data.mean_axis(Axis(0)).expect("n >= 2");
        let mut centered = &self.data - &means.insert_axis(Axis(0));
        let norm = centered.iter().map(|&v| v * v).sum::<F>().sqrt();
        if norm <= F::ZERO_NORM {
            return Err(Error::DegenerateMatrix);
        }
        centered.mapv_inplace(|v| v / norm);
        Ok(Self { data: centered, state: MatrixState::Preprocessed })
    }

    /// `self` scaled by `c`, keeping its state label.
    pub fn scaled(&self, c: F) -> Self {
        Self { data: self.data.mapv(|v| v * c), state: self.state }
    }
}

fn validate<F: Scalar>(data: &Array2<F>) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if let Some(((row, col), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteEntry { row, col });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsmKind {
    Kernel,
    SquaredDistance,
}

/// An n×n inter-example (dis)similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rsm<F> {
    data: Array2<F>,
    kind: RsmKind,
    source: String,
}

impl<F: Scalar> Rsm<F> {
    /// Validates squareness and symmetry (within 1e-9, relative to the
    /// largest entry when that exceeds 1).
    pub fn new(data: Array2<F>, kind: RsmKind, source: impl Into<String>) -> Result<Self> {
        let (n, m) = data.dim();
        if n != m {
            return Err(Error::ShapeMismatch(format!("RSM must be square, got {n}x{m}")));
        }
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        validate(&data)?;
        let scale = data.iter().fold(F::one(), |a, &v| a.max(v.abs()));
        let tol = F::lit(SYMMETRY_TOL) * scale;
        for i in 0..n {
            for j in (i + 1)..n {
                if (data[[i, j]] - data[[j, i]]).abs() > tol {
                    return Err(Error::InvalidParameter(format!("RSM not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { data, kind, source: source.into() })
    }

    pub fn data(&self) -> ArrayView2<'_, F> {
        self.data.view()
    }

    pub fn kind(&self) -> RsmKind {
        self.kind
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    /// Strict upper triangle, row-major over i < j.
    pub fn triu(&self) -> Vec<F> {
        triu(self.data.view())
    }
}

pub fn triu<F: Scalar>(m: ArrayView2<'_, F>) -> Vec<F> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(m[[i, j]]);
        }
    }
    out
}

fn require_ready<F>(x: &RepMatrix<F>) -> Result<()> {
    match x.state {
        MatrixState::Raw => Err(Error::WrongState),
        MatrixState::Preprocessed | MatrixState::Passthrough => Ok(()),
    }
}

/// Linear-kernel RSM `K = X Xᵀ`.
pub fn linear_gram<F: Scalar>(x: &RepMatrix<F>, source: impl Into<String>) -> Result<Rsm<F>> {
    require_ready(x)?;
    let g = x.data.dot(&x.data.t());
    // exact symmetry
    let n = g.nrows();
    let g = Array2::from_shape_fn((n, n), |(i, j)| if i <= j { g[[i, j]] } else { g[[j, i]] });
    Ok(Rsm { data: g, kind: RsmKind::Kernel, source: source.into() })
}

/// Squared-Euclidean RSM `K_ij = ‖xᵢ − xⱼ‖²`.
pub fn sq_euclidean_rsm<F: Scalar>(x: &RepMatrix<F>, source: impl Into<String>) -> Result<Rsm<F>> {
    require_ready(x)?;
    Ok(Rsm { data: sq_distances(x.data.view()), kind: RsmKind::SquaredDistance, source: source.into() })
}

fn sq_distances<F: Scalar>(x: ArrayView2<'_, F>) -> Array2<F> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        let ri = x.row(i);
        for j in (i + 1)..n {
            let s: F = ri.iter().zip(x.row(j).iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

/// Builds an RSM of the requested kind.
pub fn build_rsm<F: Scalar>(x: &RepMatrix<F>, kind: RsmKind, source: impl Into<String>) -> Result<Rsm<F>> {
    match kind {
        RsmKind::Kernel => linear_gram(x, source),
        RsmKind::SquaredDistance => sq_euclidean_rsm(x, source),
    }
}

/// The confounder RSM built from the network inputs: preprocessed like any
/// representation unless `raw` is set, in which case the inputs are used
/// as-is.
pub fn input_rsm<F: Scalar>(inputs: &RepMatrix<F>, kind: RsmKind, raw: bool) -> Result<Rsm<F>> {
    let x = if raw { inputs.as_passthrough() } else { inputs.preprocess()? };
    build_rsm(&x, kind, "input")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sym_eig;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn preprocess_hand_example() {
        let x = RepMatrix::raw(array![[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let p = x.preprocess().unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((p.data()[[0, 0]] - h).abs() < 1e-15);
        assert!((p.data()[[1, 0]] + h).abs() < 1e-15);
        assert_eq!(p.data()[[0, 1]], 0.0);
        assert_eq!(p.state(), MatrixState::Preprocessed);
    }

    #[test]
    fn preprocess_constant_is_degenerate() {
        let x = RepMatrix::raw(Array2::from_elem((4, 3), 2.5)).unwrap();
        assert!(matches!(x.preprocess(), Err(Error::DegenerateMatrix)));
    }

    #[test]
    fn preprocess_idempotent_and_normalized() {
        let x = RepMatrix::raw(gaussian(12, 5, 3)).unwrap();
        let p = x.preprocess().unwrap();
        let pp = p.preprocess().unwrap();
        for (a, b) in p.data().iter().zip(pp.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for m in p.data().mean_axis(Axis(0)).unwrap() {
            assert!(m.abs() < 1e-10);
        }
        let fro: f64 = p.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((fro - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_finite_rejected() {
        let e = RepMatrix::raw(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(e, Error::NonFiniteEntry { row: 0, col: 1 }));
        assert!(matches!(RepMatrix::<f64>::raw(Array2::zeros((0, 3))), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn gram_examples() {
        let h = 1.0 / 2f64.sqrt();
        let x = RepMatrix::passthrough(array![[h, 0.0], [0.0, h]]).unwrap();
        let k = linear_gram(&x, "x").unwrap();
        assert!((k.data()[[0, 0]] - 0.5).abs() < 1e-15);
        assert_eq!(k.data()[[0, 1]], 0.0);

        let p = RepMatrix::raw(gaussian(9, 4, 1)).unwrap().preprocess().unwrap();
        let k = linear_gram(&p, "p").unwrap();
        let tr: f64 = (0..9).map(|i| k.data()[[i, i]]).sum();
        assert!((tr - 1.0).abs() < 1e-10);
        let es = sym_eig(k.data()).unwrap();
        assert!(es.eigenvalues.iter().all(|&l| l >= -1e-8));

        let raw = RepMatrix::raw(gaussian(5, 2, 2)).unwrap();
        assert!(matches!(linear_gram(&raw, "r"), Err(Error::WrongState)));
        assert!(matches!(sq_euclidean_rsm(&raw, "r"), Err(Error::WrongState)));
    }

    #[test]
    fn squared_distance_examples() {
        let x = RepMatrix::passthrough(array![[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let d = sq_euclidean_rsm(&x, "x").unwrap();
        assert_eq!(d.data(), array![[0.0, 25.0], [25.0, 0.0]]);

        let same = RepMatrix::passthrough(Array2::from_elem((3, 2), 1.5)).unwrap();
        assert!(sq_euclidean_rsm(&same, "s").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distance_gram_identity() {
        let p = RepMatrix::raw(gaussian(10, 6, 5)).unwrap().preprocess().unwrap();
        let g = linear_gram(&p, "").unwrap();
        let d = sq_euclidean_rsm(&p, "").unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let via_gram = g.data()[[i, i]] + g.data()[[j, j]] - 2.0 * g.data()[[i, j]];
                assert!((d.data()[[i, j]] - via_gram).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rsm_rejects_asymmetry() {
        let m = array![[0.0, 1.0], [2.0, 0.0]];
        assert!(Rsm::new(m, RsmKind::SquaredDistance, "").is_err());
        assert!(Rsm::new(Array2::<f64>::zeros((2, 3)), RsmKind::Kernel, "").is_err());
    }

    #[test]
    fn triu_is_row_major() {
        let m = array![[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]];
        assert_eq!(triu(m.view()), vec![1.0, 2.0, 3.0]);
    }
}
