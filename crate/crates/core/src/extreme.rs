//! Extreme conditional quantiles and tail expectations from a fitted
//! tail-index regression, with plug-in standard errors.
//!
//! Beyond the threshold the conditional law is approximated by a Pareto
//! tail anchored at the sample median `med`:
//!
//! ```text
//! upper: Q(tau) = (y_min - med) ((1 - tau) / (1 - F))^(-1/v) + med
//! lower: Q(tau) = (y_max - med) (tau / F)^(-1/v) + med
//! ```
//!
//! where `F` is the kernel estimate of the conditional CDF at the threshold.

use crate::data::{PredictorResponsePairs, TailSide};
use crate::error::{GarError, Result};
use crate::kernel::{conditional_cdf, covariate_density, KernelSpec};
use crate::tail_index::{tail_exponent_at, TailFit};

/// Tail exponents at or below this make the tail expectation numerically
/// unstable, and the estimate is flagged.
pub const NEAR_NONEXISTENCE_EXPONENT: f64 = 1.05;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateWithSE {
    pub estimate: f64,
    pub se: f64,
    pub v_at_x0: f64,
    pub cdf_at_threshold: f64,
    /// `T * prod_j b_j`.
    pub effective_n: f64,
    /// Plug-in asymptotic variance of the threshold CDF estimate.
    pub sigma_f: f64,
    /// Set on tail expectations whose exponent lies in `(1, 1.05]`.
    pub near_nonexistence: bool,
}

impl EstimateWithSE {
    /// Symmetric normal interval `estimate -/+ z * se`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.estimate - z * self.se, self.estimate + z * self.se)
    }
}

/// `kernel_l2 / g * F (1 - F)`.
pub fn sigma_f(cdf_value: f64, density_value: f64, kernel_l2: f64) -> Result<f64> {
    if !(density_value > 0.0) || !density_value.is_finite() {
        return Err(GarError::DegenerateVariance(format!(
            "covariate density must be positive, got {density_value}"
        )));
    }
    if !(cdf_value > 0.0 && cdf_value < 1.0) {
        return Err(GarError::DegenerateVariance(format!(
            "threshold probability {cdf_value} is not inside (0, 1)"
        )));
    }
    Ok(kernel_l2 / density_value * cdf_value * (1.0 - cdf_value))
}

/// Pareto-tail quantile from its ingredients.
pub fn pareto_quantile(
    side: TailSide,
    threshold: f64,
    median: f64,
    cdf_at_threshold: f64,
    v: f64,
    tau: f64,
) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(crate::error::invalid("tau", format!("must lie in (0, 1), got {tau}")));
    }
    let ratio = match side {
        TailSide::Upper if tau >= cdf_at_threshold => (1.0 - tau) / (1.0 - cdf_at_threshold),
        TailSide::Lower if tau <= cdf_at_threshold => tau / cdf_at_threshold,
        _ => {
            return Err(GarError::OutsideTail {
                side,
                tau,
                boundary: cdf_at_threshold,
            })
        }
    };
    Ok((threshold - median) * ratio.powf(-1.0 / v) + median)
}

/// `sqrt(sigma_f) |value| / (sqrt(effective_n) * divisor)`.
pub fn plug_in_se(sigma_f: f64, value: f64, effective_n: f64, divisor: f64) -> f64 {
    sigma_f.sqrt() * value.abs() / (effective_n.sqrt() * divisor.abs())
}

/// Extreme conditional quantile at `x0` in the tail the fit describes.
///
/// The conditional CDF at the threshold and the covariate density both use
/// `spec`. `x0` excludes the intercept.
pub fn extreme_quantile(
    fit: &TailFit,
    pairs: &PredictorResponsePairs,
    x0: &[f64],
    tau: f64,
    spec: &KernelSpec,
) -> Result<EstimateWithSE> {
    let v = tail_exponent_at(fit, x0)?;
    let cdf = conditional_cdf(pairs, fit.threshold, x0, spec)?;
    let density = covariate_density(pairs, x0, spec)?;
    let sf = sigma_f(cdf, density, spec.kernel_l2)?;
    let q = pareto_quantile(fit.side, fit.threshold, fit.median, cdf, v, tau)?;
    let effective_n = spec.effective_n(pairs.n_pairs());
    Ok(EstimateWithSE {
        estimate: q,
        se: plug_in_se(sf, q, effective_n, v),
        v_at_x0: v,
        cdf_at_threshold: cdf,
        effective_n,
        sigma_f: sf,
        near_nonexistence: false,
    })
}

/// Expected shortfall (lower tail) or longrise (upper tail) beyond the
/// quantile in `quantile`.
pub fn expected_tail(
    fit: &TailFit,
    quantile: &EstimateWithSE,
    x0: &[f64],
) -> Result<EstimateWithSE> {
    let v = tail_exponent_at(fit, x0)?;
    if !(v > 1.0) {
        return Err(GarError::InfiniteTailExpectation(v));
    }
    let estimate = (quantile.estimate - fit.median) * v / (v - 1.0) + fit.median;
    Ok(EstimateWithSE {
        estimate,
        se: plug_in_se(quantile.sigma_f, estimate, quantile.effective_n, v - 1.0),
        v_at_x0: v,
        near_nonexistence: v <= NEAR_NONEXISTENCE_EXPONENT,
        ..quantile.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RowMatrix;
    use crate::kernel::{bandwidth_rule, KernelKind};
    use crate::tail_index::fit_tail_index;
    use std::f64::consts::PI;

    fn fit_with(side: TailSide, beta: Vec<f64>, threshold: f64, median: f64) -> TailFit {
        TailFit {
            side,
            beta,
            threshold,
            median,
            n_exceed: 10,
            n_total: 100,
            converged: true,
            iterations: 1,
        }
    }

    fn quantile_estimate(q: f64, sigma_f: f64, effective_n: f64, v: f64) -> EstimateWithSE {
        EstimateWithSE {
            estimate: q,
            se: plug_in_se(sigma_f, q, effective_n, v),
            v_at_x0: v,
            cdf_at_threshold: 0.9,
            effective_n,
            sigma_f,
            near_nonexistence: false,
        }
    }

    #[test]
    fn sigma_f_plug_in() {
        let l2 = 1.0 / (2.0 * PI.sqrt());
        let s = sigma_f(0.9, 0.5, l2).unwrap();
        assert!((s - 0.050777).abs() < 1e-6);
        let peak = sigma_f(0.5, 0.5, l2).unwrap();
        for f in [0.1, 0.3, 0.49, 0.51, 0.8] {
            assert!(sigma_f(f, 0.5, l2).unwrap() < peak);
        }
        assert!((peak - l2 / 0.5 * 0.25).abs() < 1e-15);
        assert!(sigma_f(0.9, 0.0, l2).is_err());
        assert!(sigma_f(1.0, 0.5, l2).is_err());
        assert!(sigma_f(0.0, 0.5, l2).is_err());
    }

    #[test]
    fn pareto_quantile_algebra() {
        let q = pareto_quantile(TailSide::Upper, 1.0, 0.0, 0.9, 1.0, 0.99).unwrap();
        assert!((q - 10.0).abs() < 1e-12);
        let at = pareto_quantile(TailSide::Upper, 1.7, 0.2, 0.9, 3.0, 0.9).unwrap();
        assert_eq!(at, 1.7);
        let low = pareto_quantile(TailSide::Lower, -1.0, 0.0, 0.1, 1.0, 0.01).unwrap();
        assert!((low + 10.0).abs() < 1e-12);
        assert!(matches!(
            pareto_quantile(TailSide::Upper, 1.0, 0.0, 0.9, 1.0, 0.5),
            Err(GarError::OutsideTail { .. })
        ));
        assert!(matches!(
            pareto_quantile(TailSide::Lower, -1.0, 0.0, 0.1, 1.0, 0.5),
            Err(GarError::OutsideTail { .. })
        ));
    }

    #[test]
    fn quantile_standard_error() {
        let se = plug_in_se(0.050777, 10.0, 100.0, 2.0);
        assert!((se - 0.11267).abs() < 1e-5);
    }

    #[test]
    fn tail_expectation_values() {
        let fit = fit_with(TailSide::Upper, vec![2f64.ln()], 1.0, 0.0);
        let q = quantile_estimate(10.0, 0.05, 100.0, 2.0);
        let lr = expected_tail(&fit, &q, &[]).unwrap();
        assert!((lr.estimate - 20.0).abs() < 1e-12);
        assert!(!lr.near_nonexistence);
        assert!((lr.se - plug_in_se(0.05, 20.0, 100.0, 1.0)).abs() < 1e-15);

        let fit3 = fit_with(TailSide::Upper, vec![3f64.ln()], 3.0, 2.0);
        let lr3 = expected_tail(&fit3, &quantile_estimate(10.0, 0.05, 100.0, 3.0), &[]).unwrap();
        assert!((lr3.estimate - 14.0).abs() < 1e-12);

        let heavy = fit_with(TailSide::Upper, vec![0.9f64.ln()], 1.0, 0.0);
        assert!(matches!(
            expected_tail(&heavy, &q, &[]),
            Err(GarError::InfiniteTailExpectation(_))
        ));
        let edge = fit_with(TailSide::Upper, vec![1.03f64.ln()], 1.0, 0.0);
        assert!(expected_tail(&edge, &q, &[]).unwrap().near_nonexistence);
    }

    fn sample_pairs(shift: f64) -> PredictorResponsePairs {
        let n = 400;
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let xi = ((i * 7919) % n) as f64 / n as f64 - 0.5;
            x.push(xi);
            // Symmetric Pareto(3) draws arranged by a deterministic stratum.
            let w = if u < 0.5 { -(2.0 * u).powf(-1.0 / 3.0) } else { (2.0 * (1.0 - u)).powf(-1.0 / 3.0) };
            y.push(w + 0.1 * xi + shift);
        }
        PredictorResponsePairs::from_covariates(&RowMatrix::new(n, 1, x).unwrap(), y, 1).unwrap()
    }

    #[test]
    fn quantiles_are_monotone_and_ordered() {
        let pairs = sample_pairs(0.0);
        let spec = bandwidth_rule(&pairs, 1.0).unwrap();
        for side in [TailSide::Upper, TailSide::Lower] {
            let thr = crate::tail_index::default_threshold(&pairs, side);
            let fit = fit_tail_index(&pairs, side, thr).unwrap();
            let taus: Vec<f64> = match side {
                TailSide::Upper => vec![0.95, 0.97, 0.99, 0.995],
                TailSide::Lower => vec![0.05, 0.03, 0.01, 0.005],
            };
            let mut prev: Option<f64> = None;
            for tau in taus {
                let q = extreme_quantile(&fit, &pairs, &[0.0], tau, &spec).unwrap();
                assert!(q.se >= 0.0);
                if let Some(p) = prev {
                    match side {
                        TailSide::Upper => assert!(q.estimate >= p),
                        TailSide::Lower => assert!(q.estimate <= p),
                    }
                }
                prev = Some(q.estimate);
                let et = expected_tail(&fit, &q, &[0.0]).unwrap();
                match side {
                    TailSide::Upper => assert!(et.estimate >= q.estimate),
                    TailSide::Lower => assert!(et.estimate <= q.estimate),
                }
            }
        }
    }

    #[test]
    fn location_equivariance() {
        let c = 3.25;
        let base = sample_pairs(0.0);
        let moved = sample_pairs(c);
        let spec = KernelSpec::new(KernelKind::Gaussian, vec![0.2]).unwrap();
        for (side, tau) in [(TailSide::Upper, 0.99), (TailSide::Lower, 0.01)] {
            let f0 = fit_tail_index(&base, side, crate::tail_index::default_threshold(&base, side)).unwrap();
            let f1 = fit_tail_index(&moved, side, crate::tail_index::default_threshold(&moved, side)).unwrap();
            assert!((f1.median - f0.median - c).abs() < 1e-9);
            assert!((f1.threshold - f0.threshold - c).abs() < 1e-9);
            for (a, b) in f0.beta.iter().zip(&f1.beta) {
                assert!((a - b).abs() < 1e-6);
            }
            let q0 = extreme_quantile(&f0, &base, &[0.1], tau, &spec).unwrap();
            let q1 = extreme_quantile(&f1, &moved, &[0.1], tau, &spec).unwrap();
            assert!((q1.estimate - q0.estimate - c).abs() < 1e-6);
            let e0 = expected_tail(&f0, &q0, &[0.1]).unwrap();
            let e1 = expected_tail(&f1, &q1, &[0.1]).unwrap();
            assert!((e1.estimate - e0.estimate - c).abs() < 1e-6);
        }
    }
}
