//! Tail-index regression: a covariate-dependent Pareto exponent
//! `v(x) = exp(x'beta)` fitted to the exceedances beyond a threshold.
//!
//! For the upper tail the objective is
//!
//! ```text
//! (1/T) sum_t 1{Y_t >= y_min} [ exp(X_t'b) L_t - X_t'b ],
//! L_t = log((Y_t - med) / (y_min - med))
//! ```
//!
//! and symmetrically for the lower tail with `Y_t <= y_max`. `med` is the
//! sample median of the responses. `L_t >= 0` on every exceedance, so the
//! curvature `sum exp(X'b) L X X'` is positive semidefinite and the
//! minimizer is global.

use nalgebra::{DMatrix, DVector};

use crate::data::{with_intercept, PredictorResponsePairs, TailSide};
use crate::error::{GarError, Result};
use crate::numeric::{newton_minimize, NewtonOptions, SmoothObjective};
use crate::stats;

/// A fitted tail-index regression.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub side: TailSide,
    /// Coefficients, intercept first.
    pub beta: Vec<f64>,
    /// `y_min` for the upper tail, `y_max` for the lower tail.
    pub threshold: f64,
    /// Sample median of the responses.
    pub median: f64,
    pub n_exceed: usize,
    /// Number of pairs `T` the objective is averaged over.
    pub n_total: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl TailFit {
    /// `exp((1, x0)' beta)`; `x0` excludes the intercept.
    pub fn exponent_at(&self, x0: &[f64]) -> Result<f64> {
        tail_exponent_at(self, x0)
    }

    /// Median-subtracted log exceedance ratio of `y` for this fit, or `None` when
    /// `y` is not an exceedance.
    pub fn log_ratio(&self, y: f64) -> Option<f64> {
        self.side
            .exceeds(y, self.threshold)
            .then(|| ((y - self.median) / (self.threshold - self.median)).ln())
    }
}

/// Index and log ratio of every exceedance.
pub fn log_exceedance_ratios(
    pairs: &PredictorResponsePairs,
    side: TailSide,
    threshold: f64,
    median: f64,
) -> Result<Vec<(usize, f64)>> {
    if !side.beyond_median(threshold, median) {
        return Err(GarError::ThresholdMedian {
            side,
            threshold,
            median,
        });
    }
    let scale = threshold - median;
    Ok(pairs
        .y
        .iter()
        .enumerate()
        .filter(|(_, &y)| side.exceeds(y, threshold))
        .map(|(i, &y)| (i, ((y - median) / scale).ln()))
        .collect())
}

struct Objective<'a> {
    pairs: &'a PredictorResponsePairs,
    exceed: Vec<(usize, f64)>,
    n_total: f64,
}

impl<'a> Objective<'a> {
    fn new(
        pairs: &'a PredictorResponsePairs,
        side: TailSide,
        threshold: f64,
        median: f64,
    ) -> Result<Self> {
        Ok(Self {
            exceed: log_exceedance_ratios(pairs, side, threshold, median)?,
            n_total: pairs.n_pairs() as f64,
            pairs,
        })
    }

    fn index(&self, i: usize, beta: &[f64]) -> f64 {
        self.pairs.x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    fn gradient(&self, beta: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(beta.len());
        for &(i, l) in &self.exceed {
            let w = self.index(i, beta).exp() * l - 1.0;
            for (gj, xj) in g.iter_mut().zip(self.pairs.x.row(i)) {
                *gj += w * xj;
            }
        }
        g / self.n_total
    }
}

impl SmoothObjective for Objective<'_> {
    fn dim(&self) -> usize {
        self.pairs.dim_beta()
    }

    fn value(&self, beta: &[f64]) -> f64 {
        self.exceed
            .iter()
            .map(|&(i, l)| {
                let xb = self.index(i, beta);
                xb.exp() * l - xb
            })
            .sum::<f64>()
            / self.n_total
    }

    fn derivatives(&self, beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = beta.len();
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for &(i, l) in &self.exceed {
            let x = self.pairs.x.row(i);
            let e = self.index(i, beta).exp() * l;
            for a in 0..p {
                g[a] += (e - 1.0) * x[a];
                for b in 0..=a {
                    h[(a, b)] += e * x[a] * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        (g / self.n_total, h / self.n_total)
    }
}

/// Value of the tail-index regression objective at `beta`.
pub fn tail_objective(
    beta: &[f64],
    pairs: &PredictorResponsePairs,
    side: TailSide,
    threshold: f64,
    median: f64,
) -> Result<f64> {
    check_dim(beta, pairs)?;
    Ok(Objective::new(pairs, side, threshold, median)?.value(beta))
}

/// Analytic gradient of [`tail_objective`].
pub fn tail_gradient(
    beta: &[f64],
    pairs: &PredictorResponsePairs,
    side: TailSide,
    threshold: f64,
    median: f64,
) -> Result<Vec<f64>> {
    check_dim(beta, pairs)?;
    let obj = Objective::new(pairs, side, threshold, median)?;
    Ok(obj.gradient(beta).as_slice().to_vec())
}

fn check_dim(beta: &[f64], pairs: &PredictorResponsePairs) -> Result<()> {
    if beta.len() != pairs.dim_beta() {
        return Err(GarError::DimensionMismatch {
            expected: pairs.dim_beta(),
            got: beta.len(),
        });
    }
    Ok(())
}

/// Fit with the default solver settings (gradient sup-norm below 1e-8, at
/// most 100 Newton iterations).
pub fn fit_tail_index(
    pairs: &PredictorResponsePairs,
    side: TailSide,
    threshold: f64,
) -> Result<TailFit> {
    fit_tail_index_with(pairs, side, threshold, NewtonOptions::default())
}

pub fn fit_tail_index_with(
    pairs: &PredictorResponsePairs,
    side: TailSide,
    threshold: f64,
    opts: NewtonOptions,
) -> Result<TailFit> {
    let median = stats::median(&pairs.y);
    let obj = Objective::new(pairs, side, threshold, median)?;
    let p = pairs.dim_beta();
    let n_exceed = obj.exceed.len();
    if n_exceed < p + 2 {
        return Err(GarError::TooFewExceedances {
            found: n_exceed,
            required: p + 2,
        });
    }
    let sum_l: f64 = obj.exceed.iter().map(|(_, l)| l).sum();
    if sum_l <= 0.0 {
        return Err(GarError::SingularCurvature("every exceedance sits on the threshold"));
    }
    let mut start = vec![0.0; p];
    start[0] = (n_exceed as f64 / sum_l).ln();

    let out = newton_minimize(&obj, &start, opts)?;
    Ok(TailFit {
        side,
        beta: out.x,
        threshold,
        median,
        n_exceed,
        n_total: pairs.n_pairs(),
        converged: true,
        iterations: out.iterations,
    })
}

/// Rule-of-thumb threshold: the 90% empirical quantile for the upper tail,
/// the 10% quantile for the lower tail.
pub fn default_threshold(pairs: &PredictorResponsePairs, side: TailSide) -> f64 {
    let p = match side {
        TailSide::Upper => 0.9,
        TailSide::Lower => 0.1,
    };
    stats::empirical_quantile(&pairs.y, p)
}

/// `v(x0) = exp((1, x0)' beta)`.
pub fn tail_exponent_at(fit: &TailFit, x0: &[f64]) -> Result<f64> {
    let x = with_intercept(x0, fit.beta.len() - 1)?;
    Ok(x.iter().zip(&fit.beta).map(|(a, b)| a * b).sum::<f64>().exp())
}
