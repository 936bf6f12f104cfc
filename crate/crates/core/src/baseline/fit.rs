//! Matching a skew-t distribution to a handful of fitted conditional
//! quantiles.

use rayon::prelude::*;

use super::quantreg::quantile_regression;
use super::skewt::{SkewT, SkewTParams};
use crate::data::{with_intercept, PredictorResponsePairs};
use crate::error::{invalid, GarError, Result};
use crate::numeric::{nelder_mead, SimplexOptions};

/// Quantile levels of the baseline regression grid.
pub const DEFAULT_TAUS: [f64; 5] = [0.05, 0.25, 0.50, 0.75, 0.95];

pub const SIGMA_BOUNDS: (f64, f64) = (1e-4, 1e3);
pub const NU_BOUNDS: (f64, f64) = (1.01, 300.0);
pub const ALPHA_BOUND: f64 = 100.0;

/// Starting `(alpha, nu)` pairs, tried in this order.
const STARTS: [(f64, f64); 8] = [
    (-1.5, 4.0),
    (-0.3, 4.0),
    (0.3, 4.0),
    (1.5, 4.0),
    (-1.5, 30.0),
    (-0.3, 30.0),
    (0.3, 30.0),
    (1.5, 30.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGridFit {
    pub taus: Vec<f64>,
    /// One coefficient vector (intercept first) per level.
    pub betas: Vec<Vec<f64>>,
}

impl QuantileGridFit {
    pub fn new(taus: Vec<f64>, betas: Vec<Vec<f64>>) -> Result<Self> {
        if taus.len() != betas.len() {
            return Err(GarError::DimensionMismatch {
                expected: taus.len(),
                got: betas.len(),
            });
        }
        if taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) || taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("taus", "must be strictly increasing inside (0, 1)"));
        }
        Ok(Self { taus, betas })
    }

    /// Fitted quantiles `(1, x0)' beta(tau)` at a covariate vector without
    /// intercept.
    pub fn quantiles_at(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let dim = self.betas.first().map_or(0, |b| b.len().saturating_sub(1));
        let x = with_intercept(x0, dim)?;
        Ok(self
            .betas
            .iter()
            .map(|b| b.iter().zip(&x).map(|(u, v)| u * v).sum())
            .collect())
    }
}

/// Run a quantile regression per level.
pub fn fit_quantile_grid(pairs: &PredictorResponsePairs, taus: &[f64]) -> Result<QuantileGridFit> {
    let betas = taus
        .par_iter()
        .map(|&t| quantile_regression(pairs, t))
        .collect::<Result<Vec<_>>>()?;
    QuantileGridFit::new(taus.to_vec(), betas)
}

/// Least-squares `(mu, sigma)` for `targets ~ mu + sigma * z`, with sigma
/// clamped into its bounds.
fn profile_location_scale(targets: &[f64], z: &[f64]) -> (f64, f64) {
    let n = targets.len() as f64;
    let mt = targets.iter().sum::<f64>() / n;
    let mz = z.iter().sum::<f64>() / n;
    let sxy: f64 = targets.iter().zip(z).map(|(t, s)| (t - mt) * (s - mz)).sum();
    let sxx: f64 = z.iter().map(|s| (s - mz) * (s - mz)).sum();
    let raw = if sxx > 0.0 { sxy / sxx } else { SIGMA_BOUNDS.0 };
    let sigma = raw.clamp(SIGMA_BOUNDS.0, SIGMA_BOUNDS.1);
    (mt - sigma * mz, sigma)
}

fn shape_from(point: &[f64]) -> (f64, f64) {
    let alpha = point[0].clamp(-ALPHA_BOUND, ALPHA_BOUND);
    let nu = (1.0 + point[1].exp()).clamp(NU_BOUNDS.0, NU_BOUNDS.1);
    (alpha, nu)
}

/// Parameters and squared quantile mismatch for a shape `(alpha, nu)`, with
/// location and scale profiled out.
fn profiled(targets: &[f64], taus: &[f64], alpha: f64, nu: f64) -> Option<(SkewTParams, f64)> {
    let std = SkewT::new(SkewTParams::standard(alpha, nu).ok()?).ok()?;
    let z = std.quantiles(taus).ok()?;
    let (mu, sigma) = profile_location_scale(targets, &z);
    let loss = targets
        .iter()
        .zip(&z)
        .map(|(t, s)| (t - mu - sigma * s).powi(2))
        .sum();
    Some((SkewTParams { mu, sigma, alpha, nu }, loss))
}

/// Squared distance between `targets` and the skew-t quantiles of `theta`.
pub fn quantile_mismatch(theta: &SkewTParams, taus: &[f64], targets: &[f64]) -> Result<f64> {
    let q = SkewT::new(*theta)?.quantiles(taus)?;
    Ok(q.iter().zip(targets).map(|(a, b)| (a - b).powi(2)).sum())
}

/// Skew-t matching the given quantiles in least squares.
pub fn fit_skewt_to_target_quantiles(taus: &[f64], targets: &[f64]) -> Result<SkewTParams> {
    if taus.len() != targets.len() {
        return Err(GarError::DimensionMismatch {
            expected: taus.len(),
            got: targets.len(),
        });
    }
    if taus.len() < 4 {
        return Err(invalid(
            "quantile grid",
            format!("need at least 4 quantiles for 4 parameters, got {}", taus.len()),
        ));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(invalid("quantile grid", "fitted quantiles must be finite"));
    }

    let objective = |p: &[f64]| {
        let (alpha, nu) = shape_from(p);
        profiled(targets, taus, alpha, nu).map_or(f64::INFINITY, |(_, l)| l)
    };
    let opts = SimplexOptions {
        initial_step: 0.4,
        f_tolerance: 1e-12,
        x_tolerance: 1e-5,
        max_evaluations: 600,
    };
    // Starts run independently; the winner is the first strict minimum in
    // start order.
    let finished: Vec<Option<(SkewTParams, f64)>> = STARTS
        .par_iter()
        .map(|&(alpha, nu)| {
            let out = nelder_mead(objective, &[alpha, (nu - 1.0).ln()], opts);
            if !out.value.is_finite() {
                return None;
            }
            let (a, n) = shape_from(&out.x);
            profiled(targets, taus, a, n)
        })
        .collect();
    let mut best: Option<(SkewTParams, f64)> = None;
    for cand in finished.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    best.map(|(p, _)| p).ok_or(GarError::NonConvergence {
        solver: "skew-t quantile matching",
        iterations: STARTS.len(),
        residual: f64::INFINITY,
    })
}

/// Skew-t whose quantiles best match the grid's fitted quantiles at `x0`.
pub fn fit_skewt_to_quantiles(grid: &QuantileGridFit, x0: &[f64]) -> Result<SkewTParams> {
    if grid.taus.len() < 4 {
        return Err(invalid(
            "quantile grid",
            format!("need at least 4 quantiles for 4 parameters, got {}", grid.taus.len()),
        ));
    }
    let targets = grid.quantiles_at(x0)?;
    fit_skewt_to_target_quantiles(&grid.taus, &targets)
}
