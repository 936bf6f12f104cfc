//! The skew-t baseline: quantile regressions on a fixed grid, a skew-t
//! matched to the fitted quantiles at the query point, and tail
//! expectations of that skew-t.

pub mod fit;
pub mod quantreg;
pub mod skewt;

pub use fit::{
    fit_quantile_grid, fit_skewt_to_quantiles, fit_skewt_to_target_quantiles, quantile_mismatch,
    QuantileGridFit, DEFAULT_TAUS,
};
pub use quantreg::{check_loss, check_objective, quantile_regression};
pub use skewt::{skewt_cdf, skewt_expected_tail, skewt_pdf, skewt_quantile, SkewT, SkewTParams};
