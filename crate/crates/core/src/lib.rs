//! Robust Growth-at-Risk estimation.
//!
//! The crate fits a covariate-dependent Pareto exponent to each tail of the
//! conditional distribution of future growth (tail-index regression), turns
//! it into extreme conditional quantiles and expected shortfall/longrise
//! with standard errors, and provides the skew-t quantile-regression
//! baseline together with Monte Carlo and expanding-window backtest
//! harnesses comparing the two.

pub mod backtest;
pub mod baseline;
pub mod data;
mod error;
pub mod extreme;
pub mod kernel;
pub mod methods;
pub mod numeric;
pub mod simulation;
pub mod stats;
pub mod tail_index;
pub mod threshold;

pub use data::{align_horizon, load_dataset, PredictorResponsePairs, RowMatrix, Schema, TailSide, TimeSeriesDataset};
pub use error::{GarError, Result};
pub use tail_index::{fit_tail_index, tail_exponent_at, tail_objective, TailFit};
pub use extreme::{expected_tail, extreme_quantile, sigma_f, EstimateWithSE};
pub use kernel::{bandwidth_rule, conditional_cdf, covariate_density, KernelKind, KernelSpec};
pub use threshold::{discrepancy, pit_values, select_threshold, ThresholdSearchResult};
pub use baseline::{
    fit_quantile_grid, fit_skewt_to_quantiles, quantile_regression, skewt_cdf, skewt_expected_tail,
    skewt_quantile, QuantileGridFit, SkewT, SkewTParams,
};
pub use methods::{fit_new_tail, fit_old, Method, NewMethodConfig, ThresholdRule};

pub use simulation::{
    run_monte_carlo, sample_covariates, sample_dataset, sample_series, Design, DesignLabel, DgpSpec,
    McConfig, McSummary, ParetoDesign, SplicedParetoDesign, Target,
};
pub use backtest::{
    coverage_table, expanding_backtest, scenario_density, BacktestConfig, BacktestReport, CoverageTable,
    ScenarioDensity,
};
