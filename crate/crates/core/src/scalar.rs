//! Floating-point scalar abstraction shared by the numeric core.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the similarity pipeline is generic over: `f32` or `f64`.
///
/// The associated tolerances are absolute floors below which a quantity is
/// treated as numerically zero. They are tuned per precision; the `f64`
/// values are the contract values the test suites check against.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + ScalarOperand
    + 'static
{
    /// Self-HSIC at or below this, relative to `(‖K‖_F/(n−1))²`, marks a
    /// degenerate kernel.
    const DEGENERATE_HSIC: Self;
    /// Norms at or below this are zero (singular confounder, empty spectrum).
    const ZERO_NORM: Self;
    /// A residual whose Frobenius norm is below this fraction of the
    /// original RSM's norm is considered fully explained by the confounder.
    const RESIDUAL_REL_TOL: Self;
    /// Off-diagonal convergence threshold for Jacobi sweeps, relative to ‖S‖_F.
    const JACOBI_TOL: Self;

    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Scalar for f64 {
    const DEGENERATE_HSIC: f64 = 1e-15;
    const ZERO_NORM: f64 = 1e-12;
    const RESIDUAL_REL_TOL: f64 = 1e-11;
    const JACOBI_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const DEGENERATE_HSIC: f32 = 1e-9;
    const ZERO_NORM: f32 = 1e-6;
    const RESIDUAL_REL_TOL: f32 = 1e-4;
    const JACOBI_TOL: f32 = 1e-6;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(f64::lit(0.1), 0.1);
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::from_usize_lossy(7), 7.0);
    }
}
