//! Product-kernel smoothing over the covariates: the Nadaraya–Watson
//! conditional CDF `F(y | x0)` and the covariate density `g(x0)`.
//!
//! The intercept column never enters the kernel distance.

use std::f64::consts::PI;

use crate::data::PredictorResponsePairs;
use crate::error::{invalid, GarError, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gaussian,
    Epanechnikov,
}

impl KernelKind {
    /// Kernel shape scaled so that `shape(0) = 1`. The constant cancels in
    /// the conditional CDF, which then reproduces an unweighted empirical
    /// CDF exactly when all weights coincide.
    #[inline]
    fn shape(self, u: f64) -> f64 {
        match self {
            KernelKind::Gaussian => (-0.5 * u * u).exp(),
            KernelKind::Epanechnikov => {
                if u.abs() < 1.0 {
                    1.0 - u * u
                } else {
                    0.0
                }
            }
        }
    }

    /// `K(0)`, the factor between [`Self::shape`] and the density kernel.
    fn peak(self) -> f64 {
        match self {
            KernelKind::Gaussian => 1.0 / (2.0 * PI).sqrt(),
            KernelKind::Epanechnikov => 0.75,
        }
    }

    /// `int K(u)^2 du` in one dimension.
    pub fn l2_norm_squared(self) -> f64 {
        match self {
            KernelKind::Gaussian => 1.0 / (2.0 * PI.sqrt()),
            KernelKind::Epanechnikov => 0.6,
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = GarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelKind::Gaussian),
            "epanechnikov" => Ok(KernelKind::Epanechnikov),
            other => Err(invalid("kernel", format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// One bandwidth per non-intercept covariate.
    pub bandwidths: Vec<f64>,
    /// `int K(u)^2 du` of the product kernel.
    pub kernel_l2: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, bandwidths: Vec<f64>) -> Result<Self> {
        if let Some(b) = bandwidths.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(invalid("bandwidth", format!("must be positive, got {b}")));
        }
        let kernel_l2 = kind.l2_norm_squared().powi(bandwidths.len() as i32);
        Ok(Self {
            kind,
            bandwidths,
            kernel_l2,
        })
    }

    pub fn dim(&self) -> usize {
        self.bandwidths.len()
    }

    /// Product of the bandwidths, the multivariate `b^dim`.
    pub fn bandwidth_volume(&self) -> f64 {
        self.bandwidths.iter().product()
    }

    /// `T * prod_j b_j`, the effective sample size of the local estimators.
    pub fn effective_n(&self, n: usize) -> f64 {
        n as f64 * self.bandwidth_volume()
    }

    /// Product-kernel weight of `x` around `x0`, up to the factor `K(0)^dim`.
    #[inline]
    pub fn weight(&self, x: &[f64], x0: &[f64]) -> f64 {
        x.iter()
            .zip(x0)
            .zip(&self.bandwidths)
            .map(|((a, b), h)| self.kind.shape((a - b) / h))
            .product()
    }

    fn check(&self, x0: &[f64], pairs: &PredictorResponsePairs) -> Result<()> {
        if x0.len() != self.dim() || pairs.dim_x() != self.dim() {
            return Err(GarError::DimensionMismatch {
                expected: self.dim(),
                got: if x0.len() != self.dim() { x0.len() } else { pairs.dim_x() },
            });
        }
        Ok(())
    }

    /// Kernel weights of every pair around `x0`.
    pub fn weights(&self, pairs: &PredictorResponsePairs, x0: &[f64]) -> Result<Vec<f64>> {
        self.check(x0, pairs)?;
        Ok((0..pairs.n_pairs())
            .map(|i| self.weight(pairs.covariates(i), x0))
            .collect())
    }
}

/// Rule-of-thumb bandwidths `scale * sd_j * n^(-1/(4 + dim))` with the
/// Gaussian kernel.
pub fn bandwidth_rule(pairs: &PredictorResponsePairs, scale: f64) -> Result<KernelSpec> {
    bandwidth_rule_with(pairs, scale, KernelKind::Gaussian)
}

pub fn bandwidth_rule_with(
    pairs: &PredictorResponsePairs,
    scale: f64,
    kind: KernelKind,
) -> Result<KernelSpec> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("bandwidth scale", format!("must be positive, got {scale}")));
    }
    let d = pairs.dim_x();
    let n = pairs.n_pairs() as f64;
    let rate = n.powf(-1.0 / (4.0 + d as f64));
    let mut bw = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = pairs.x.column(j + 1).collect();
        let sd = stats::sample_std(&col);
        if !(sd > 0.0) {
            return Err(GarError::ConstantCovariate(j + 1));
        }
        bw.push(scale * sd * rate);
    }
    KernelSpec::new(kind, bw)
}

/// Kernel-weighted share of responses at or below `y`.
pub fn conditional_cdf(
    pairs: &PredictorResponsePairs,
    y: f64,
    x0: &[f64],
    spec: &KernelSpec,
) -> Result<f64> {
    let w = spec.weights(pairs, x0)?;
    weighted_cdf(&w, &pairs.y, y)
}

pub(crate) fn weighted_cdf(weights: &[f64], ys: &[f64], y: f64) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(GarError::ZeroKernelWeight);
    }
    let below: f64 = weights
        .iter()
        .zip(ys)
        .filter(|(_, &yi)| yi <= y)
        .map(|(w, _)| w)
        .sum();
    Ok((below / total).clamp(0.0, 1.0))
}

/// Product-kernel density estimate of the covariates at `x0`.
pub fn covariate_density(
    pairs: &PredictorResponsePairs,
    x0: &[f64],
    spec: &KernelSpec,
) -> Result<f64> {
    if pairs.n_pairs() == 0 {
        return Err(GarError::EmptyDataset);
    }
    let w = spec.weights(pairs, x0)?;
    let peak = spec.kind.peak().powi(spec.dim() as i32);
    Ok(peak * w.iter().sum::<f64>() / spec.effective_n(pairs.n_pairs()))
}
