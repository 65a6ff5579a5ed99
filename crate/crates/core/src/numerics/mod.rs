//! Shared numerical kernels.

pub mod correlation;
pub mod eigen;
pub mod lstsq;
pub mod stats;

pub use correlation::{correlate, kendall_tau_b, pearson, rank_with_ties, spearman, CorrelationResult};
pub use eigen::{sym_eig, sym_eig_with, EigenMethod, EigenSystem};
pub use lstsq::{ols_through_origin, polyfit_bic, PolyFit};
pub use stats::{durbin_watson, mean_stderr, quantile};
