//! Representational similarity between neural-network layer activations.
//!
//! The crate computes linear CKA and RSA between activation matrices and
//! their deconfounded variants, in which the input-space similarity
//! structure is regressed out of every representational similarity matrix
//! (RSM) before the comparison. Kernel residuals are projected back onto the
//! PSD cone by eigenvalue clipping with a trace-ratio rescale.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`numerics`] | symmetric eigensolvers, least squares, rank statistics |
//! | [`rsm`] | activation preprocessing, linear-kernel and squared-distance RSMs |
//! | [`deconfound`] | confounder regression, PSD repair, diagnostics |
//! | [`indices`] | HSIC, CKA, RSA and the deconfounded/recursive indices |
//! | [`netsim`] | seeded synthetic MLPs, perturbations and input domains |
//! | [`ingest`] | NPY/CSV activations, manifests, score tables, reports |
//! | [`harness`] | experiment protocols producing reports |
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the simulator and harness use.

pub mod deconfound;
pub mod error;
pub mod harness;
pub mod indices;
pub mod ingest;
pub mod netsim;
pub mod numerics;
pub mod rsm;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use indices::{Degeneracy, Metric, RsaVariant};
pub use rsm::{MatrixState, RsmKind};
pub use scalar::Scalar;

pub type RepMatrix = rsm::RepMatrix<f64>;
pub type Rsm = rsm::Rsm<f64>;
pub type DeconfoundedRsm = deconfound::DeconfoundedRsm<f64>;
pub type PsdRepairResult = deconfound::PsdRepairResult<f64>;
pub type SimilarityScore = indices::SimilarityScore<f64>;
pub type PreparedRsm = indices::PreparedRsm<f64>;
pub type EigenSystem = numerics::EigenSystem<f64>;
pub type PolyFit = numerics::PolyFit<f64>;

pub type RepMatrix32 = rsm::RepMatrix<f32>;
pub type Rsm32 = rsm::Rsm<f32>;
pub type SimilarityScore32 = indices::SimilarityScore<f32>;
