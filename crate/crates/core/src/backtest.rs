//! Expanding-window out-of-sample evaluation on a time series, breach
//! counting, and tail densities under a covariate scenario.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{align_horizon, compare_labels, PredictorResponsePairs, TailSide, TimeSeriesDataset};
use crate::error::{invalid, GarError, Result};
use crate::extreme::extreme_quantile;
use crate::methods::{fit_new_tail, fit_old, new_kernel, old_quantile, Method, NewMethodConfig, ThresholdRule};
use crate::baseline::SkewT;

pub const DEFAULT_MIN_TRAIN: usize = 32;
pub const DEFAULT_HORIZON: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    /// Quantile levels of the lower and upper predictions.
    pub lower_tau: f64,
    pub upper_tau: f64,
    pub new_method: NewMethodConfig,
    /// The skew-t baseline is far slower per window; it can be skipped.
    pub include_old: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            lower_tau: 0.05,
            upper_tau: 0.95,
            new_method: NewMethodConfig {
                thresholds: ThresholdRule::DataDriven(None),
                ..NewMethodConfig::default()
            },
            include_old: true,
        }
    }
}

/// Lower and upper predictions of one method in one window.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodPrediction {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// First estimator error in this window, if any.
    pub failure: Option<String>,
}

impl MethodPrediction {
    fn from_results(lower: Result<f64>, upper: Result<f64>) -> Self {
        let failure = match (&lower, &upper) {
            (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
            _ => None,
        };
        Self {
            lower: lower.ok(),
            upper: upper.ok(),
            failure,
        }
    }

    fn skipped() -> Self {
        Self {
            lower: None,
            upper: None,
            failure: Some("not run".into()),
        }
    }

    pub fn is_prediction(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRow {
    /// 1-based period of the forecast origin `t`.
    pub origin: usize,
    pub origin_label: String,
    pub target_label: String,
    /// Number of `(X_i, Y_{i+h})` pairs the window was fitted on.
    pub train_pairs: usize,
    pub realized: f64,
    pub new: MethodPrediction,
    pub old: MethodPrediction,
    pub lower_threshold: Option<f64>,
    pub upper_threshold: Option<f64>,
}

impl BacktestRow {
    pub fn prediction(&self, method: Method) -> &MethodPrediction {
        match method {
            Method::New => &self.new,
            Method::Old => &self.old,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub horizon: usize,
    pub min_train: usize,
    pub config: BacktestConfig,
    pub rows: Vec<BacktestRow>,
}

impl BacktestReport {
    /// Rows whose target period lies in `[from, to]` (labels compared
    /// numerically when both parse as numbers).
    pub fn restrict_targets(&self, from: &str, to: &str) -> Self {
        let rows = self
            .rows
            .iter()
            .filter(|r| {
                compare_labels(&r.target_label, from).is_ge() && compare_labels(&r.target_label, to).is_le()
            })
            .cloned()
            .collect();
        Self { rows, ..self.clone() }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(create(path.as_ref())?)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "origin",
            "target",
            "train_pairs",
            "realized",
            "new_lower",
            "new_upper",
            "old_lower",
            "old_upper",
            "lower_threshold",
            "upper_threshold",
            "new_status",
            "old_status",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.origin_label.clone(),
                r.target_label.clone(),
                r.train_pairs.to_string(),
                r.realized.to_string(),
                opt(r.new.lower),
                opt(r.new.upper),
                opt(r.old.lower),
                opt(r.old.upper),
                opt(r.lower_threshold),
                opt(r.upper_threshold),
                status(&r.new),
                status(&r.old),
            ])?;
        }
        w.flush().map_err(|e| GarError::Csv(e.into()))?;
        Ok(())
    }
}

fn status(p: &MethodPrediction) -> String {
    match &p.failure {
        None => "ok".into(),
        Some(e) => format!("no-prediction: {e}"),
    }
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| GarError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct WindowFit {
    new: MethodPrediction,
    old: MethodPrediction,
    lower_threshold: Option<f64>,
    upper_threshold: Option<f64>,
}

fn fit_window(train: &PredictorResponsePairs, x0: &[f64], config: &BacktestConfig) -> WindowFit {
    let cfg = &config.new_method;
    let kernel = new_kernel(train, cfg);
    let lower_fit = fit_new_tail(train, TailSide::Lower, cfg);
    let upper_fit = fit_new_tail(train, TailSide::Upper, cfg);
    let predict = |fit: &Result<crate::TailFit>, tau: f64| -> Result<f64> {
        let fit = fit.as_ref().map_err(|e| invalid("tail fit", e.to_string()))?;
        let kernel = kernel.as_ref().map_err(|e| invalid("kernel", e.to_string()))?;
        Ok(extreme_quantile(fit, train, x0, tau, kernel)?.estimate)
    };
    let new = MethodPrediction::from_results(
        predict(&lower_fit, config.lower_tau),
        predict(&upper_fit, config.upper_tau),
    );
    let old = if config.include_old {
        match fit_old(train, x0) {
            Ok(theta) => MethodPrediction::from_results(
                old_quantile(&theta, config.lower_tau),
                old_quantile(&theta, config.upper_tau),
            ),
            Err(e) => MethodPrediction::from_results(Err(invalid("skew-t", e.to_string())), Err(e)),
        }
    } else {
        MethodPrediction::skipped()
    };
    WindowFit {
        new,
        old,
        lower_threshold: lower_fit.ok().map(|f| f.threshold),
        upper_threshold: upper_fit.ok().map(|f| f.threshold),
    }
}

/// For each origin `t = min_train, ..., T - h` (1-based), fit both methods
/// on the pairs `(X_i, Y_{i+h})` with `i + h <= t`, so that no response after
/// period `t` is seen, and predict the quantiles of `Y_{t+h}` at `X_t`.
pub fn expanding_backtest(
    dataset: &TimeSeriesDataset,
    h: usize,
    min_train: usize,
    config: &BacktestConfig,
) -> Result<BacktestReport> {
    let n = dataset.len();
    if h == 0 || h >= n {
        return Err(GarError::InvalidHorizon { horizon: h, max: n - 1 });
    }
    if min_train > n - h {
        return Err(GarError::WindowTooShort(format!(
            "min_train {min_train} exceeds T - h = {} for T = {n}, h = {h}",
            n - h
        )));
    }
    if min_train <= h {
        return Err(GarError::WindowTooShort(format!(
            "min_train {min_train} leaves no training pair at horizon {h}"
        )));
    }
    if !(config.lower_tau > 0.0 && config.lower_tau < 0.5 && config.upper_tau > 0.5 && config.upper_tau < 1.0) {
        return Err(invalid("tau", "lower level must lie in (0, 0.5) and upper in (0.5, 1)"));
    }
    let all_pairs = align_horizon(dataset, h)?;

    let rows = (min_train..=n - h)
        .into_par_iter()
        .map(|t| {
            let train = all_pairs.head(t - h);
            let x0 = dataset.x.row(t - 1);
            let fit = fit_window(&train, x0, config);
            BacktestRow {
                origin: t,
                origin_label: dataset.timestamps[t - 1].clone(),
                target_label: dataset.timestamps[t - 1 + h].clone(),
                train_pairs: train.n_pairs(),
                realized: dataset.y[t - 1 + h],
                new: fit.new,
                old: fit.old,
                lower_threshold: fit.lower_threshold,
                upper_threshold: fit.upper_threshold,
            }
        })
        .collect();
    Ok(BacktestReport {
        horizon: h,
        min_train,
        config: config.clone(),
        rows,
    })
}

/// Breach tally of one prediction tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tally {
    pub breaches: usize,
    /// Rows with a prediction in this tail.
    pub predictions: usize,
}

impl Tally {
    pub fn frequency(&self) -> f64 {
        if self.predictions == 0 {
            0.0
        } else {
            self.breaches as f64 / self.predictions as f64
        }
    }
}

impl fmt::Display for Tally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.1}% ({}/{})",
            100.0 * self.frequency(),
            self.breaches,
            self.predictions
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub method: Method,
    /// Realized value strictly below the lower prediction.
    pub below: Tally,
    /// Realized value strictly above the upper prediction.
    pub above: Tally,
    /// Windows flagged as no-prediction for this method.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTable {
    pub rows: Vec<CoverageRow>,
    pub intended_lower: f64,
    pub intended_upper: f64,
}

impl CoverageTable {
    pub fn method(&self, method: Method) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(create(path.as_ref())?)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "method",
            "below_count",
            "below_frequency",
            "above_count",
            "above_frequency",
            "predictions",
            "excluded",
            "intended_frequency",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.method.to_string(),
                r.below.breaches.to_string(),
                r.below.frequency().to_string(),
                r.above.breaches.to_string(),
                r.above.frequency().to_string(),
                r.below.predictions.to_string(),
                r.excluded.to_string(),
                self.intended_lower.to_string(),
            ])?;
        }
        w.flush().map_err(|e| GarError::Csv(e.into()))?;
        Ok(())
    }
}

impl fmt::Display for CoverageTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10}{:>22}{:>22}{:>10}", "Method", "below lower", "above upper", "excluded")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10}{:>22}{:>22}{:>10}",
                r.method.as_str(),
                r.below.to_string(),
                r.above.to_string(),
                r.excluded
            )?;
        }
        write!(
            f,
            "{:<10}{:>22}{:>22}",
            "Intended",
            format!("{:.1}%", 100.0 * self.intended_lower),
            format!("{:.1}%", 100.0 * (1.0 - self.intended_upper))
        )
    }
}

/// Count breaches of each method's predictions. Windows in which a method
/// failed are left out of that method's denominators.
pub fn coverage_table(report: &BacktestReport) -> CoverageTable {
    let mut methods = vec![Method::New];
    if report.config.include_old {
        methods.insert(0, Method::Old);
    }
    let rows = methods
        .into_iter()
        .map(|method| {
            let mut below = Tally { breaches: 0, predictions: 0 };
            let mut above = below;
            let mut excluded = 0;
            for r in &report.rows {
                let p = r.prediction(method);
                if !p.is_prediction() {
                    excluded += 1;
                    continue;
                }
                if let Some(lo) = p.lower {
                    below.predictions += 1;
                    below.breaches += usize::from(r.realized < lo);
                }
                if let Some(hi) = p.upper {
                    above.predictions += 1;
                    above.breaches += usize::from(r.realized > hi);
                }
            }
            CoverageRow {
                method,
                below,
                above,
                excluded,
            }
        })
        .collect();
    CoverageTable {
        rows,
        intended_lower: report.config.lower_tau,
        intended_upper: report.config.upper_tau,
    }
}

/// Pareto tail density anchored at the median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoTail {
    pub side: TailSide,
    pub threshold: f64,
    pub median: f64,
    pub v: f64,
    /// Conditional probability of the tail region beyond the threshold.
    pub tail_mass: f64,
}

impl ParetoTail {
    /// Zero outside the tail region.
    pub fn density(&self, y: f64) -> f64 {
        if !self.side.exceeds(y, self.threshold) {
            return 0.0;
        }
        let r = ((y - self.median) / (self.threshold - self.median)).abs();
        let scale = (self.threshold - self.median).abs();
        self.tail_mass * self.v * r.powf(-self.v - 1.0) / scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDensity {
    pub tail: TailSide,
    pub grid: Vec<f64>,
    pub old: Vec<f64>,
    pub new: Vec<f64>,
    /// Tail-level quantile of each method (5th percentile for the lower
    /// tail, 95th for the upper).
    pub old_marker: f64,
    pub new_marker: f64,
    pub new_tail: ParetoTail,
}

impl ScenarioDensity {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(create(path.as_ref())?)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["y", "density_old", "density_new"])?;
        for i in 0..self.grid.len() {
            w.write_record([self.grid[i].to_string(), self.old[i].to_string(), self.new[i].to_string()])?;
        }
        w.flush().map_err(|e| GarError::Csv(e.into()))?;
        Ok(())
    }
}

/// Tail densities implied by full-sample fits of both methods at the
/// covariate scenario `x_scenario`.
pub fn scenario_density(
    dataset: &TimeSeriesDataset,
    h: usize,
    x_scenario: &[f64],
    tail: TailSide,
    grid: &[f64],
    config: &BacktestConfig,
) -> Result<ScenarioDensity> {
    let pairs = align_horizon(dataset, h)?;
    let tau = match tail {
        TailSide::Lower => config.lower_tau,
        TailSide::Upper => config.upper_tau,
    };
    let theta = fit_old(&pairs, x_scenario)?;
    let skewt = SkewT::new(theta)?;
    let old_marker = skewt.quantile(tau)?;

    let kernel = new_kernel(&pairs, &config.new_method)?;
    let fit = fit_new_tail(&pairs, tail, &config.new_method)?;
    let q = extreme_quantile(&fit, &pairs, x_scenario, tau, &kernel)?;
    let new_tail = ParetoTail {
        side: tail,
        threshold: fit.threshold,
        median: fit.median,
        v: q.v_at_x0,
        tail_mass: match tail {
            TailSide::Upper => 1.0 - q.cdf_at_threshold,
            TailSide::Lower => q.cdf_at_threshold,
        },
    };
    Ok(ScenarioDensity {
        tail,
        grid: grid.to_vec(),
        old: grid.iter().map(|&y| skewt.pdf(y)).collect(),
        new: grid.iter().map(|&y| new_tail.density(y)).collect(),
        old_marker,
        new_marker: q.estimate,
        new_tail,
    })
}
