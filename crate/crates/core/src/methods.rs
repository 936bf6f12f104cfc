//! The two competing forecasters.
//!
//! `New` is the tail-index regression with Pareto extrapolation, `Old` the
//! skew-t fitted to five regression quantiles.

use std::fmt;
use std::str::FromStr;

use crate::baseline::{fit_quantile_grid, fit_skewt_to_quantiles, SkewT, SkewTParams, DEFAULT_TAUS};
use crate::data::{PredictorResponsePairs, TailSide};
use crate::error::{invalid, GarError, Result};
use crate::extreme::{expected_tail, extreme_quantile, EstimateWithSE};
use crate::kernel::{bandwidth_rule_with, KernelKind, KernelSpec};
use crate::tail_index::{default_threshold, fit_tail_index, TailFit};
use crate::threshold::{default_grid, select_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    New,
    Old,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::New => "New",
            Method::Old => "Old",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = GarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "new" => Ok(Method::New),
            "old" => Ok(Method::Old),
            other => Err(invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// How the New method places its tail thresholds.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdRule {
    /// 90% / 10% empirical quantiles.
    RuleOfThumb,
    /// Discrepancy-minimising choice over a grid of empirical quantile
    /// levels; `None` uses the default grid of each tail.
    DataDriven(Option<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewMethodConfig {
    pub thresholds: ThresholdRule,
    pub kernel: KernelKind,
    pub bandwidth_scale: f64,
}

impl Default for NewMethodConfig {
    fn default() -> Self {
        Self {
            thresholds: ThresholdRule::RuleOfThumb,
            kernel: KernelKind::Gaussian,
            bandwidth_scale: 1.0,
        }
    }
}

/// Tail fit for one side under the configured threshold rule.
pub fn fit_new_tail(
    pairs: &PredictorResponsePairs,
    side: TailSide,
    config: &NewMethodConfig,
) -> Result<TailFit> {
    match &config.thresholds {
        ThresholdRule::RuleOfThumb => fit_tail_index(pairs, side, default_threshold(pairs, side)),
        ThresholdRule::DataDriven(grid) => {
            let grid = grid.clone().unwrap_or_else(|| default_grid(side));
            Ok(select_threshold(pairs, side, &grid)?.fit)
        }
    }
}

/// Tail probability level of the quantile an expected tail extends.
pub fn tail_level(pi: f64, side: TailSide) -> f64 {
    match side {
        TailSide::Upper => 1.0 - pi,
        TailSide::Lower => pi,
    }
}

/// New-method expected shortfall (`Lower`) or longrise (`Upper`) at tail
/// probability `pi`, with the quantile it extends.
pub fn new_expected_tail(
    fit: &TailFit,
    pairs: &PredictorResponsePairs,
    x0: &[f64],
    pi: f64,
    spec: &KernelSpec,
) -> Result<(EstimateWithSE, EstimateWithSE)> {
    let q = extreme_quantile(fit, pairs, x0, tail_level(pi, fit.side), spec)?;
    let e = expected_tail(fit, &q, x0)?;
    Ok((q, e))
}

/// Kernel of the New method under `config`.
pub fn new_kernel(pairs: &PredictorResponsePairs, config: &NewMethodConfig) -> Result<KernelSpec> {
    bandwidth_rule_with(pairs, config.bandwidth_scale, config.kernel)
}

/// Old-method conditional skew-t at `x0`.
pub fn fit_old(pairs: &PredictorResponsePairs, x0: &[f64]) -> Result<SkewTParams> {
    let grid = fit_quantile_grid(pairs, &DEFAULT_TAUS)?;
    fit_skewt_to_quantiles(&grid, x0)
}

/// Old-method quantile from a fitted skew-t.
pub fn old_quantile(theta: &SkewTParams, tau: f64) -> Result<f64> {
    SkewT::new(*theta)?.quantile(tau)
}

pub fn old_expected_tail(theta: &SkewTParams, pi: f64, side: TailSide) -> Result<f64> {
    SkewT::new(*theta)?.expected_tail(pi, side)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in [Method::New, Method::Old] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("neither".parse::<Method>().is_err());
    }
}
