//! Simulation designs and the Monte Carlo comparison of the two methods.
//!
//! The two skew-t designs draw covariates from Student-t marginals tied by
//! a Gaussian copula and then draw the response from a skew-t whose
//! parameters are affine (or log-affine) in the covariates. Two Pareto-tailed
//! designs with a constant tail exponent are available as well; their tail
//! quantities are known in closed form.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::{erfc, erfc_inv};

use crate::baseline::{SkewT, SkewTParams};
use crate::data::{PredictorResponsePairs, RowMatrix, TailSide, TimeSeriesDataset};
use crate::error::{invalid, GarError, Result};
use crate::extreme::extreme_quantile;
use crate::methods::{
    fit_new_tail, fit_old, new_expected_tail, new_kernel, old_expected_tail, old_quantile, Method,
    NewMethodConfig,
};
use crate::stats;

/// Which published design a [`DgpSpec`] reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignLabel {
    QuarterAhead,
    YearAhead,
}

impl DesignLabel {
    /// Forecast horizon the design stands for.
    pub fn horizon(self) -> usize {
        match self {
            DesignLabel::QuarterAhead => 1,
            DesignLabel::YearAhead => 4,
        }
    }
}

impl FromStr for DesignLabel {
    type Err = GarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quarter" | "quarter-ahead" => Ok(DesignLabel::QuarterAhead),
            "year" | "year-ahead" => Ok(DesignLabel::YearAhead),
            other => Err(invalid("design", format!("unknown design `{other}`"))),
        }
    }
}

/// `c0 + c1 x1 + c2 x2`.
pub type Affine = [f64; 3];

fn affine(c: &Affine, x: &[f64]) -> f64 {
    c[0] + c[1] * x[0] + c[2] * x[1]
}

/// Two-covariate skew-t design.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub m_x: [f64; 2],
    pub s_x: [[f64; 2]; 2],
    pub d_x: [f64; 2],
    pub mu: Affine,
    pub log_sigma: Affine,
    pub alpha: Affine,
    pub log_nu: Affine,
    pub label: DesignLabel,
}

impl DgpSpec {
    pub fn quarter_ahead() -> Self {
        Self {
            m_x: [2.732, 0.007],
            s_x: [[10.671, -1.152], [-1.152, 0.972]],
            d_x: [6.360, 7.064],
            mu: [2.053, -0.341, -1.678],
            log_sigma: [0.925, 0.085, 0.437],
            alpha: [-0.710, 0.763, -1.218],
            log_nu: [2.848, -0.162, 0.303],
            label: DesignLabel::QuarterAhead,
        }
    }

    pub fn year_ahead() -> Self {
        Self {
            m_x: [2.761, 0.018],
            s_x: [[10.806, -1.193], [-1.193, 0.981]],
            d_x: [14.216, 7.685],
            mu: [2.301, -0.107, -0.289],
            log_sigma: [0.642, 0.0589, 0.224],
            alpha: [1.019, 0.087, -0.668],
            log_nu: [1.214, 0.115, 0.340],
            label: DesignLabel::YearAhead,
        }
    }

    pub fn from_label(label: DesignLabel) -> Self {
        match label {
            DesignLabel::QuarterAhead => Self::quarter_ahead(),
            DesignLabel::YearAhead => Self::year_ahead(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.d_x.iter().find(|d| !(**d > 2.0)) {
            return Err(invalid(
                "d_x",
                format!("Student-t degrees of freedom must exceed 2 for a finite variance, got {d}"),
            ));
        }
        self.copula_factor().map(|_| ())
    }

    /// Cholesky factor of the copula correlation matrix implied by `s_x`.
    fn copula_factor(&self) -> Result<Matrix2<f64>> {
        let s = &self.s_x;
        if s[0][1] != s[1][0] || !(s[0][0] > 0.0 && s[1][1] > 0.0) {
            return Err(invalid("s_x", "covariance must be symmetric with a positive diagonal"));
        }
        let r = s[0][1] / (s[0][0] * s[1][1]).sqrt();
        Matrix2::new(1.0, r, r, 1.0)
            .cholesky()
            .map(|c| c.l())
            .ok_or_else(|| invalid("s_x", "covariance is not positive definite"))
    }

    /// Skew-t parameters at a covariate vector.
    pub fn theta_at(&self, x: &[f64]) -> Result<SkewTParams> {
        if x.len() != 2 {
            return Err(GarError::DimensionMismatch { expected: 2, got: x.len() });
        }
        SkewTParams::new(
            affine(&self.mu, x),
            affine(&self.log_sigma, x).exp(),
            affine(&self.alpha, x),
            affine(&self.log_nu, x).exp(),
        )
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// A data-generating process for `(X, Y)` with known tail functionals.
pub trait Design: Sync {
    fn dim_x(&self) -> usize;

    /// Forecast horizon recorded on generated pairs.
    fn horizon(&self) -> usize {
        1
    }

    /// Default conditioning point of the comparisons.
    fn default_x0(&self) -> Vec<f64>;

    fn draw_covariates(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<RowMatrix>;

    fn draw_response(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<f64>;

    fn true_quantile(&self, x0: &[f64], tau: f64) -> Result<f64>;

    fn true_expected_tail(&self, x0: &[f64], pi: f64, side: TailSide) -> Result<f64>;

    /// `n` pairs; covariates are drawn first, then responses, from one
    /// stream seeded by `seed`.
    fn sample_pairs(&self, n: usize, seed: u64) -> Result<PredictorResponsePairs> {
        if n == 0 {
            return Err(invalid("n", "need at least one draw"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = self.draw_covariates(n, &mut rng)?;
        let y = x
            .rows()
            .map(|row| self.draw_response(row, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        PredictorResponsePairs::from_covariates(&x, y, self.horizon())
    }
}

impl Design for DgpSpec {
    fn dim_x(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.label.horizon()
    }

    fn default_x0(&self) -> Vec<f64> {
        self.m_x.to_vec()
    }

    fn draw_covariates(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<RowMatrix> {
        self.validate()?;
        let l = self.copula_factor()?;
        let marginals = self
            .d_x
            .iter()
            .map(|&d| StudentsT::new(0.0, 1.0, d).map_err(|e| invalid("d_x", e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let scale: Vec<f64> = (0..2)
            .map(|j| (self.s_x[j][j] * (self.d_x[j] - 2.0) / self.d_x[j]).sqrt())
            .collect();
        let mut data = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let e = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
            let z = l * e;
            for j in 0..2 {
                // Map through the smaller tail probability to keep precision
                // far out in either tail.
                let lower = marginals[j].inverse_cdf(std_normal_cdf(-z[j].abs()));
                let t = if z[j] > 0.0 { -lower } else { lower };
                data.push(self.m_x[j] + scale[j] * t);
            }
        }
        RowMatrix::new(n, 2, data)
    }

    fn draw_response(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        let u: f64 = rng.sample(Open01);
        SkewT::new(self.theta_at(x)?)?.quantile(u)
    }

    fn true_quantile(&self, x0: &[f64], tau: f64) -> Result<f64> {
        SkewT::new(self.theta_at(x0)?)?.quantile(tau)
    }

    fn true_expected_tail(&self, x0: &[f64], pi: f64, side: TailSide) -> Result<f64> {
        SkewT::new(self.theta_at(x0)?)?.expected_tail(pi, side)
    }
}

/// Covariates of the Pareto designs: `n` independent standard normals.
fn normal_column(n: usize, rng: &mut ChaCha8Rng) -> Result<RowMatrix> {
    RowMatrix::new(n, 1, (0..n).map(|_| rng.sample(StandardNormal)).collect())
}

/// One standard-normal covariate `X` and a response that, given `X = x`, is
/// uniform on `[-1, 1]` with mass `1 - 2p` and has `+/- Pareto(1, v(x))`
/// tails of mass `p` each, where `v(x) = exp(a + b x)`. The conditional
/// median is 0 and the tail probability beyond 1 does not depend on `x`, so
/// the median-anchored tail-index model is exact beyond any threshold
/// outside `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoDesign {
    pub tail_prob: f64,
    /// `(a, b)` of the log exponent.
    pub log_v: [f64; 2],
}

impl Default for ParetoDesign {
    fn default() -> Self {
        Self::constant(3.0)
    }
}

impl ParetoDesign {
    /// Covariate-free exponent `v`; `X` is independent of `Y`.
    pub fn constant(v: f64) -> Self {
        Self {
            tail_prob: 0.15,
            log_v: [v.ln(), 0.0],
        }
    }

    pub fn exponent_at(&self, x: f64) -> f64 {
        (self.log_v[0] + self.log_v[1] * x).exp()
    }

    fn quantile(&self, x: f64, tau: f64) -> f64 {
        let p = self.tail_prob;
        let v = self.exponent_at(x);
        if tau >= 1.0 - p {
            ((1.0 - tau) / p).powf(-1.0 / v)
        } else if tau <= p {
            -(tau / p).powf(-1.0 / v)
        } else {
            -1.0 + 2.0 * (tau - p) / (1.0 - 2.0 * p)
        }
    }
}

impl Design for ParetoDesign {
    fn dim_x(&self) -> usize {
        1
    }

    fn default_x0(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn draw_covariates(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<RowMatrix> {
        normal_column(n, rng)
    }

    fn draw_response(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok(self.quantile(x[0], rng.sample(Open01)))
    }

    fn true_quantile(&self, x0: &[f64], tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(invalid("tau", format!("must lie in (0, 1), got {tau}")));
        }
        if x0.len() != 1 {
            return Err(GarError::DimensionMismatch { expected: 1, got: x0.len() });
        }
        Ok(self.quantile(x0[0], tau))
    }

    fn true_expected_tail(&self, x0: &[f64], pi: f64, side: TailSide) -> Result<f64> {
        let q = self.true_quantile(x0, crate::methods::tail_level(pi, side))?;
        let v = self.exponent_at(x0[0]);
        if !(v > 1.0) {
            return Err(GarError::InfiniteTailExpectation(v));
        }
        if !(pi > 0.0 && pi <= self.tail_prob) {
            return Err(invalid("pi", format!("must lie in (0, {}], got {pi}", self.tail_prob)));
        }
        Ok(q * v / (v - 1.0))
    }
}

/// Response law independent of one standard-normal covariate: with
/// probability `body_mass` a standard normal truncated above at `body_cut`,
/// otherwise `m + (splice - m) V^(-1/v)` for uniform `V`, where `m` is the
/// population median. Between `body_cut` and `splice` there is no mass, and
/// the median-anchored Pareto model holds exactly only from `splice` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplicedParetoDesign {
    pub body_mass: f64,
    pub body_cut: f64,
    pub splice: f64,
    pub v: f64,
}

impl Default for SplicedParetoDesign {
    fn default() -> Self {
        Self {
            body_mass: 0.85,
            body_cut: std_normal_quantile(0.99),
            splice: 3.5,
            v: 3.0,
        }
    }
}

impl SplicedParetoDesign {
    fn body_cdf_at_cut(&self) -> f64 {
        std_normal_cdf(self.body_cut)
    }

    /// Population median.
    pub fn median(&self) -> f64 {
        std_normal_quantile(0.5 * self.body_cdf_at_cut() / self.body_mass)
    }

    fn quantile(&self, tau: f64) -> f64 {
        if tau <= self.body_mass {
            std_normal_quantile(tau / self.body_mass * self.body_cdf_at_cut())
        } else {
            let m = self.median();
            m + (self.splice - m) * ((1.0 - tau) / (1.0 - self.body_mass)).powf(-1.0 / self.v)
        }
    }
}

impl Design for SplicedParetoDesign {
    fn dim_x(&self) -> usize {
        1
    }

    fn default_x0(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn draw_covariates(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<RowMatrix> {
        normal_column(n, rng)
    }

    fn draw_response(&self, _x: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok(self.quantile(rng.sample(Open01)))
    }

    fn true_quantile(&self, _x0: &[f64], tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(invalid("tau", format!("must lie in (0, 1), got {tau}")));
        }
        Ok(self.quantile(tau))
    }

    fn true_expected_tail(&self, x0: &[f64], pi: f64, side: TailSide) -> Result<f64> {
        if side == TailSide::Lower || !(pi > 0.0 && pi <= 1.0 - self.body_mass) {
            return Err(invalid("pi", "only upper-tail expectations inside the Pareto part are known"));
        }
        let m = self.median();
        Ok((self.true_quantile(x0, 1.0 - pi)? - m) * self.v / (self.v - 1.0) + m)
    }
}

/// Covariates of a skew-t design.
pub fn sample_covariates(spec: &DgpSpec, n: usize, seed: u64) -> Result<RowMatrix> {
    if n == 0 {
        return Err(invalid("n", "need at least one draw"));
    }
    spec.draw_covariates(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Pairs from a skew-t design; the covariates equal
/// `sample_covariates(spec, n, seed)`.
pub fn sample_dataset(spec: &DgpSpec, n: usize, seed: u64) -> Result<PredictorResponsePairs> {
    spec.sample_pairs(n, seed)
}

/// A time series of length `n` in which `Y_{t+h}` is drawn given `X_t`. The
/// first `h` responses are drawn given fresh covariate draws.
pub fn sample_series<D: Design + ?Sized>(
    design: &D,
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<TimeSeriesDataset> {
    if n <= horizon {
        return Err(invalid("n", format!("series of {n} periods is not longer than horizon {horizon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = design.draw_covariates(n, &mut rng)?;
    let warmup = design.draw_covariates(horizon, &mut rng)?;
    let mut y = Vec::with_capacity(n);
    for t in 0..n {
        let driver = if t < horizon { warmup.row(t) } else { x.row(t - horizon) };
        y.push(design.draw_response(driver, &mut rng)?);
    }
    let names = (1..=design.dim_x()).map(|j| format!("x{j}")).collect();
    TimeSeriesDataset::new((1..=n).map(|t| t.to_string()).collect(), "y", names, y, x)
}

/// A tail functional compared across methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Quantile(f64),
    /// Expected shortfall at tail probability `pi`.
    Shortfall(f64),
    /// Expected longrise at tail probability `pi`.
    Longrise(f64),
}

impl Target {
    fn validate(&self) -> Result<()> {
        match *self {
            Target::Quantile(t) if t > 0.0 && t < 1.0 => Ok(()),
            Target::Shortfall(p) | Target::Longrise(p) if p > 0.0 && p < 0.5 => Ok(()),
            _ => Err(invalid("target", format!("probability out of range in `{self}`"))),
        }
    }

    pub fn truth<D: Design + ?Sized>(&self, design: &D, x0: &[f64]) -> Result<f64> {
        match *self {
            Target::Quantile(t) => design.true_quantile(x0, t),
            Target::Shortfall(p) => design.true_expected_tail(x0, p, TailSide::Lower),
            Target::Longrise(p) => design.true_expected_tail(x0, p, TailSide::Upper),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Quantile(t) => write!(f, "quantile:{t}"),
            Target::Shortfall(p) => write!(f, "shortfall:{p}"),
            Target::Longrise(p) => write!(f, "longrise:{p}"),
        }
    }
}

impl FromStr for Target {
    type Err = GarError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| invalid("target", format!("expected kind:value, got `{s}`")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| invalid("target", format!("bad probability in `{s}`")))?;
        let t = match kind.trim().to_ascii_lowercase().as_str() {
            "quantile" | "q" => Target::Quantile(v),
            "shortfall" | "sf" => Target::Shortfall(v),
            "longrise" | "lr" => Target::Longrise(v),
            other => return Err(invalid("target", format!("unknown kind `{other}`"))),
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub targets: Vec<Target>,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Conditioning point; the design default when `None`.
    pub x0: Option<Vec<f64>>,
    pub new_method: NewMethodConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub method: Method,
    pub target: Target,
    pub sample_size: usize,
    pub mean: f64,
    pub iqr_lo: f64,
    pub iqr_hi: f64,
    pub rmse: f64,
    pub truth: f64,
    pub failures: usize,
    /// Successful estimates in replication order.
    pub estimates: Vec<f64>,
}

impl McRow {
    pub fn bias(&self) -> f64 {
        self.mean - self.truth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub rows: Vec<McRow>,
    pub reps: usize,
    pub x0: Vec<f64>,
}

impl McSummary {
    pub fn row(&self, method: Method, target: Target, sample_size: usize) -> Option<&McRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.target == target && r.sample_size == sample_size)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| GarError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_to(file)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "target", "T", "mean", "iqr_lo", "iqr_hi", "rmse", "truth", "failures"])?;
        for r in &self.rows {
            w.write_record([
                r.method.to_string(),
                r.target.to_string(),
                r.sample_size.to_string(),
                r.mean.to_string(),
                r.iqr_lo.to_string(),
                r.iqr_hi.to_string(),
                r.rmse.to_string(),
                r.truth.to_string(),
                r.failures.to_string(),
            ])?;
        }
        w.flush().map_err(|e| GarError::Csv(e.into()))?;
        Ok(())
    }
}

/// Half-width factor of the Gaussian interquartile range.
const GAUSSIAN_IQR_HALF: f64 = 0.6745;

/// Estimates of every `(method, target)` from one sample, `None` on
/// failure, in `methods x targets` order.
fn estimate_all(
    pairs: &PredictorResponsePairs,
    x0: &[f64],
    config: &McConfig,
) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(config.methods.len() * config.targets.len());
    for &method in &config.methods {
        match method {
            Method::New => {
                let cfg = &config.new_method;
                let kernel = new_kernel(pairs, cfg);
                let upper = fit_new_tail(pairs, TailSide::Upper, cfg);
                let lower = fit_new_tail(pairs, TailSide::Lower, cfg);
                for target in &config.targets {
                    let est = (|| -> Result<f64> {
                        let kernel = kernel.as_ref().map_err(clone_err)?;
                        match *target {
                            Target::Quantile(t) => {
                                let fit = if t > 0.5 { &upper } else { &lower };
                                let fit = fit.as_ref().map_err(clone_err)?;
                                Ok(extreme_quantile(fit, pairs, x0, t, kernel)?.estimate)
                            }
                            Target::Shortfall(p) => {
                                let fit = lower.as_ref().map_err(clone_err)?;
                                Ok(new_expected_tail(fit, pairs, x0, p, kernel)?.1.estimate)
                            }
                            Target::Longrise(p) => {
                                let fit = upper.as_ref().map_err(clone_err)?;
                                Ok(new_expected_tail(fit, pairs, x0, p, kernel)?.1.estimate)
                            }
                        }
                    })();
                    out.push(est.ok().filter(|v| v.is_finite()));
                }
            }
            Method::Old => {
                let theta = fit_old(pairs, x0);
                for target in &config.targets {
                    let est = theta.as_ref().ok().and_then(|th| match *target {
                        Target::Quantile(t) => old_quantile(th, t).ok(),
                        Target::Shortfall(p) => old_expected_tail(th, p, TailSide::Lower).ok(),
                        Target::Longrise(p) => old_expected_tail(th, p, TailSide::Upper).ok(),
                    });
                    out.push(est.filter(|v| v.is_finite()));
                }
            }
        }
    }
    out
}

/// Failures only need counting here; keep the message.
fn clone_err(e: &GarError) -> GarError {
    GarError::InvalidArgument {
        name: "estimate",
        reason: e.to_string(),
    }
}

fn summarise(estimates: Vec<f64>, truth: f64) -> (f64, f64, f64, f64, Vec<f64>) {
    if estimates.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN, estimates);
    }
    let mean = stats::mean(&estimates);
    let sd = if estimates.len() > 1 { stats::sample_std(&estimates) } else { f64::NAN };
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / estimates.len() as f64;
    (mean, mean - GAUSSIAN_IQR_HALF * sd, mean + GAUSSIAN_IQR_HALF * sd, mse.sqrt(), estimates)
}

/// Replicate both methods on fresh samples and summarise each
/// `(method, target, T)` cell. Replication `r` uses seed `seed + r` at
/// every sample size.
pub fn run_monte_carlo<D: Design + ?Sized>(design: &D, config: &McConfig) -> Result<McSummary> {
    if config.reps < 2 {
        return Err(invalid("reps", format!("need at least 2 replications, got {}", config.reps)));
    }
    if config.targets.is_empty() || config.sample_sizes.is_empty() || config.methods.is_empty() {
        return Err(invalid("monte carlo", "targets, sample sizes and methods must be non-empty"));
    }
    for t in &config.targets {
        t.validate()?;
    }
    let x0 = config.x0.clone().unwrap_or_else(|| design.default_x0());
    if x0.len() != design.dim_x() {
        return Err(GarError::DimensionMismatch {
            expected: design.dim_x(),
            got: x0.len(),
        });
    }
    let truths = config
        .targets
        .iter()
        .map(|t| t.truth(design, &x0))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for &n in &config.sample_sizes {
        let per_rep: Vec<Result<Vec<Option<f64>>>> = (0..config.reps)
            .into_par_iter()
            .map(|r| {
                let pairs = design.sample_pairs(n, config.seed.wrapping_add(r as u64))?;
                Ok(estimate_all(&pairs, &x0, config))
            })
            .collect();
        let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;

        let mut cell = 0;
        for &method in &config.methods {
            for (k, &target) in config.targets.iter().enumerate() {
                let ok: Vec<f64> = per_rep.iter().filter_map(|v| v[cell]).collect();
                let failures = config.reps - ok.len();
                let (mean, iqr_lo, iqr_hi, rmse, estimates) = summarise(ok, truths[k]);
                rows.push(McRow {
                    method,
                    target,
                    sample_size: n,
                    mean,
                    iqr_lo,
                    iqr_hi,
                    rmse,
                    truth: truths[k],
                    failures,
                    estimates,
                });
                cell += 1;
            }
        }
    }
    Ok(McSummary {
        rows,
        reps: config.reps,
        x0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_parameter_tables() {
        let q = DgpSpec::quarter_ahead();
        assert_eq!(q.m_x, [2.732, 0.007]);
        assert_eq!(q.s_x, [[10.671, -1.152], [-1.152, 0.972]]);
        assert_eq!(q.d_x, [6.360, 7.064]);
        assert_eq!(q.mu, [2.053, -0.341, -1.678]);
        assert_eq!(q.log_sigma, [0.925, 0.085, 0.437]);
        assert_eq!(q.alpha, [-0.710, 0.763, -1.218]);
        assert_eq!(q.log_nu, [2.848, -0.162, 0.303]);
        assert_eq!(q.label.horizon(), 1);

        let y = DgpSpec::year_ahead();
        assert_eq!(y.m_x, [2.761, 0.018]);
        assert_eq!(y.s_x, [[10.806, -1.193], [-1.193, 0.981]]);
        assert_eq!(y.d_x, [14.216, 7.685]);
        assert_eq!(y.mu, [2.301, -0.107, -0.289]);
        assert_eq!(y.log_sigma, [0.642, 0.0589, 0.224]);
        assert_eq!(y.alpha, [1.019, 0.087, -0.668]);
        assert_eq!(y.log_nu, [1.214, 0.115, 0.340]);
        assert_eq!(y.label.horizon(), 4);
    }

    #[test]
    fn parameters_at_the_mean() {
        let q = DgpSpec::quarter_ahead();
        let th = q.theta_at(&q.m_x).unwrap();
        assert!((th.nu - 11.107).abs() < 1e-3);
        assert!((th.mu - 1.1096).abs() < 1e-4);
    }

    #[test]
    fn covariate_sampling() {
        let q = DgpSpec::quarter_ahead();
        let x = sample_covariates(&q, 100_000, 1).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = x.column(j).collect();
            assert!((stats::mean(&col) - q.m_x[j]).abs() < 0.05);
            assert!((stats::sample_std(&col).powi(2) / q.s_x[j][j] - 1.0).abs() < 0.05);
        }
        assert_eq!(sample_covariates(&q, 50, 9).unwrap(), sample_covariates(&q, 50, 9).unwrap());
        let bad = DgpSpec { d_x: [2.0, 7.0], ..q.clone() };
        assert!(sample_covariates(&bad, 5, 1).is_err());
        let not_pd = DgpSpec { s_x: [[1.0, 2.0], [2.0, 1.0]], ..q };
        assert!(sample_covariates(&not_pd, 5, 1).is_err());
    }

    #[test]
    fn dataset_shares_covariates() {
        let q = DgpSpec::year_ahead();
        let pairs = sample_dataset(&q, 40, 5).unwrap();
        let x = sample_covariates(&q, 40, 5).unwrap();
        for i in 0..40 {
            assert_eq!(pairs.covariates(i), x.row(i));
        }
        assert_eq!(pairs.horizon, 4);
    }

    #[test]
    fn pareto_design_truths() {
        let d = ParetoDesign::default();
        let q = d.true_quantile(&[0.0], 0.99).unwrap();
        assert!((q - (0.01f64 / 0.15).powf(-1.0 / 3.0)).abs() < 1e-14);
        assert_eq!(d.true_quantile(&[0.0], 0.5).unwrap(), 0.0);
        let lr = d.true_expected_tail(&[0.0], 0.05, TailSide::Upper).unwrap();
        assert!((lr - 1.5 * d.quantile(0.0, 0.95)).abs() < 1e-14);

        let s = SplicedParetoDesign::default();
        assert!((s.median() - 0.2081).abs() < 1e-3);
        assert!((s.quantile(0.5) - s.median()).abs() < 1e-12);
        assert!((s.quantile(0.85 + 1e-12) - s.splice).abs() < 1e-6);
        assert!((s.quantile(0.85) - s.body_cut).abs() < 1e-9);
    }

    #[test]
    fn series_is_reproducible() {
        let a = sample_series(&ParetoDesign::default(), 30, 4, 2).unwrap();
        assert_eq!(a, sample_series(&ParetoDesign::default(), 30, 4, 2).unwrap());
        assert_eq!(a.len(), 30);
    }

    #[test]
    fn target_labels_round_trip() {
        for t in [Target::Quantile(0.99), Target::Shortfall(0.05), Target::Longrise(0.05)] {
            assert_eq!(t.to_string().parse::<Target>().unwrap(), t);
        }
        assert_eq!(Target::Quantile(0.99).to_string(), "quantile:0.99");
        assert!("quantile:1.5".parse::<Target>().is_err());
    }

    fn small_config(reps: usize) -> McConfig {
        McConfig {
            targets: (1..=5).map(|k| Target::Quantile(0.94 + 0.01 * k as f64)).collect(),
            sample_sizes: vec![150, 300],
            reps,
            seed: 3,
            methods: vec![Method::New, Method::Old],
            x0: None,
            new_method: NewMethodConfig::default(),
        }
    }

    #[test]
    fn summary_row_count_and_invariants() {
        let summary = run_monte_carlo(&ParetoDesign::default(), &McConfig {
            methods: vec![Method::New, Method::Old],
            ..small_config(3)
        })
        .unwrap();
        assert_eq!(summary.rows.len(), 20);
        for r in &summary.rows {
            if r.estimates.len() > 0 {
                assert!(r.rmse + 1e-12 >= r.bias().abs());
            }
            assert_eq!(r.failures + r.estimates.len(), 3);
        }
        assert!(run_monte_carlo(&ParetoDesign::default(), &small_config(1)).is_err());
    }
}
