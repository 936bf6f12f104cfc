use std::path::{Path, PathBuf};

use gar_core::backtest::{coverage_table, expanding_backtest, scenario_density, BacktestConfig};
use gar_core::baseline::{fit_quantile_grid, fit_skewt_to_quantiles, SkewT, DEFAULT_TAUS};
use gar_core::methods::{fit_new_tail, new_kernel, Method, NewMethodConfig, ThresholdRule};
use gar_core::simulation::{run_monte_carlo, sample_series, Design, DgpSpec, McConfig, McSummary, ParetoDesign, Target};
use gar_core::threshold::default_grid;
use gar_core::{
    align_horizon, expected_tail, extreme_quantile, load_dataset, select_threshold, KernelKind,
    PredictorResponsePairs, Schema, TailSide, TimeSeriesDataset,
};

use crate::error::{usage, CliError};
use crate::svg::{Chart, Stroke};
use crate::{BacktestArgs, BaselineArgs, DataArgs, FitArgs, McArgs, NewArgs, ScenarioArgs, SelectArgs, SimulateArgs};

type Files = Result<Vec<PathBuf>, CliError>;

fn parse_list(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let v = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| usage(flag, format!("`{}` is not a number", p.trim())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err(usage(flag, "needs at least one value"));
    }
    Ok(v)
}

fn probability(flag: &str, p: f64) -> Result<f64, CliError> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(usage(flag, format!("probability {p} is outside (0, 1)")))
    }
}

fn probabilities(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    parse_list(flag, s)?.into_iter().map(|p| probability(flag, p)).collect()
}

fn side(flag: &str, s: &str) -> Result<TailSide, CliError> {
    s.parse().map_err(|_| usage(flag, format!("expected `lower` or `upper`, got `{s}`")))
}

fn seed(s: Option<u64>) -> Result<u64, CliError> {
    s.ok_or_else(|| usage("seed", "required for stochastic commands"))
}

fn load(a: &DataArgs) -> Result<(TimeSeriesDataset, PredictorResponsePairs), CliError> {
    let covariates: Vec<String> = a
        .covariates
        .as_deref()
        .map(|c| c.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default();
    let ds = load_dataset(&a.input, &Schema::new(a.date_column.clone(), a.response.clone(), covariates))?;
    if a.horizon == 0 || a.horizon >= ds.len() {
        return Err(usage("horizon", format!("must lie in 1..{} for {} periods", ds.len(), ds.len())));
    }
    let pairs = align_horizon(&ds, a.horizon)?;
    Ok((ds, pairs))
}

fn point(flag: &str, s: &str, ds: &TimeSeriesDataset, pairs: &PredictorResponsePairs) -> Result<Vec<f64>, CliError> {
    let x0 = match s {
        "sample-mean" => pairs.covariate_means(),
        "sample-median" => ds.covariate_medians(),
        other => parse_list(flag, other)?,
    };
    if x0.len() != pairs.dim_x() {
        return Err(usage(
            flag,
            format!("{} values given for {} covariates", x0.len(), pairs.dim_x()),
        ));
    }
    Ok(x0)
}

fn new_config(a: &NewArgs, default: ThresholdRule) -> Result<NewMethodConfig, CliError> {
    let thresholds = match a.threshold.as_deref() {
        None => default,
        Some("rule" | "rule-of-thumb") => ThresholdRule::RuleOfThumb,
        Some("data-driven") => ThresholdRule::DataDriven(None),
        Some(other) => return Err(usage("threshold", format!("expected `rule` or `data-driven`, got `{other}`"))),
    };
    let kernel: KernelKind = a.kernel.parse().map_err(|e| usage("kernel", e))?;
    if !(a.bandwidth_scale > 0.0 && a.bandwidth_scale.is_finite()) {
        return Err(usage("bandwidth-scale", "must be positive"));
    }
    Ok(NewMethodConfig {
        thresholds,
        kernel,
        bandwidth_scale: a.bandwidth_scale,
    })
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<std::fs::File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, CliError> {
        let path = dir.join(name);
        let file = std::fs::File::create(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let mut t = Self {
            path,
            writer: csv::Writer::from_writer(file),
        };
        t.row(header.iter().map(|s| s.to_string()))?;
        Ok(t)
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        self.writer
            .write_record(fields.into_iter().collect::<Vec<_>>())
            .map_err(|e| self.io(e.into()))
    }

    fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush().map_err(|e| self.io(e))?;
        Ok(self.path)
    }

    fn io(&self, source: std::io::Error) -> CliError {
        CliError::Io {
            path: self.path.clone(),
            source,
        }
    }
}

fn core_write(path: PathBuf, r: gar_core::Result<()>) -> Result<PathBuf, CliError> {
    r?;
    Ok(path)
}

fn svg(chart: Chart, path: PathBuf) -> Result<PathBuf, CliError> {
    chart.write(&path)?;
    Ok(path)
}

pub fn fit(a: &FitArgs, out: &Path) -> Files {
    let side = side("tail", &a.tail)?;
    let default_tau = match side {
        TailSide::Lower => "0.05",
        TailSide::Upper => "0.95",
    };
    let taus = probabilities("tau", a.tau.as_deref().unwrap_or(default_tau))?;
    if let Some(t) = taus.iter().find(|&&t| (side == TailSide::Lower) != (t < 0.5)) {
        return Err(usage("tau", format!("{t} is not in the {side} tail")));
    }
    let cfg = new_config(&a.new, ThresholdRule::RuleOfThumb)?;
    let (ds, pairs) = load(&a.data)?;
    let x0 = point("x0", &a.x0, &ds, &pairs)?;
    let kernel = new_kernel(&pairs, &cfg)?;
    let fit = fit_new_tail(&pairs, side, &cfg)?;

    let mut est = Table::create(
        out,
        "estimates.csv",
        &[
            "tail",
            "tau",
            "quantile",
            "quantile_se",
            "pi",
            "expected_tail",
            "expected_tail_se",
            "v_at_x0",
            "cdf_at_threshold",
            "threshold",
            "median",
            "effective_n",
            "near_nonexistence",
            "status",
        ],
    )?;
    for &tau in &taus {
        let pi = match side {
            TailSide::Lower => tau,
            TailSide::Upper => 1.0 - tau,
        };
        let mut row = vec![side.to_string(), tau.to_string()];
        match extreme_quantile(&fit, &pairs, &x0, tau, &kernel) {
            Ok(q) => {
                let e = expected_tail(&fit, &q, &x0);
                let (ev, ese, near) = match &e {
                    Ok(e) => (e.estimate.to_string(), e.se.to_string(), e.near_nonexistence.to_string()),
                    Err(_) => (String::new(), String::new(), "true".into()),
                };
                row.extend([q.estimate.to_string(), q.se.to_string(), pi.to_string(), ev, ese]);
                row.extend([q.v_at_x0.to_string(), q.cdf_at_threshold.to_string()]);
                row.extend([fit.threshold.to_string(), fit.median.to_string(), q.effective_n.to_string(), near]);
                row.push(e.err().map_or_else(|| "ok".to_string(), |e| e.to_string()));
            }
            Err(e) => {
                row.extend([String::new(), String::new(), pi.to_string(), String::new(), String::new()]);
                row.extend([String::new(), String::new()]);
                row.extend([fit.threshold.to_string(), fit.median.to_string(), String::new(), String::new()]);
                row.push(e.to_string());
            }
        }
        est.row(row)?;
    }
    let mut coef = Table::create(out, "tail_coefficients.csv", &["term", "beta"])?;
    let terms = std::iter::once("intercept".to_string()).chain(ds.covariate_names.iter().cloned());
    for (term, b) in terms.zip(&fit.beta) {
        coef.row([term, b.to_string()])?;
    }
    Ok(vec![est.finish()?, coef.finish()?])
}

pub fn select(a: &SelectArgs, out: &Path) -> Files {
    let side = side("tail", &a.tail)?;
    let grid = match &a.grid {
        Some(g) => probabilities("grid", g)?,
        None => default_grid(side),
    };
    let (_, pairs) = load(&a.data)?;
    let r = select_threshold(&pairs, side, &grid)?;
    let mut t = Table::create(
        out,
        "threshold_search.csv",
        &["level", "threshold", "tail_size", "discrepancy", "chosen"],
    )?;
    for i in 0..r.grid.len() {
        t.row([
            grid[i].to_string(),
            r.grid[i].to_string(),
            r.tail_sizes[i].to_string(),
            r.discrepancies[i].to_string(),
            (i == r.chosen_index).to_string(),
        ])?;
    }
    Ok(vec![t.finish()?])
}

pub fn baseline(a: &BaselineArgs, out: &Path) -> Files {
    let taus = probabilities("tau", &a.tau)?;
    let pi = probability("pi", a.pi)?;
    if pi >= 0.5 {
        return Err(usage("pi", "must be below 0.5"));
    }
    let (ds, pairs) = load(&a.data)?;
    let x0 = point("x0", &a.x0, &ds, &pairs)?;
    let grid = fit_quantile_grid(&pairs, &DEFAULT_TAUS)?;
    let theta = fit_skewt_to_quantiles(&grid, &x0)?;
    let d = SkewT::new(theta)?;

    let mut t = Table::create(out, "baseline.csv", &["quantity", "value"])?;
    for (k, v) in [("mu", theta.mu), ("sigma", theta.sigma), ("alpha", theta.alpha), ("nu", theta.nu)] {
        t.row([k.to_string(), v.to_string()])?;
    }
    for &tau in &taus {
        t.row([Target::Quantile(tau).to_string(), d.quantile(tau)?.to_string()])?;
    }
    t.row([Target::Shortfall(pi).to_string(), d.expected_tail(pi, TailSide::Lower)?.to_string()])?;
    t.row([Target::Longrise(pi).to_string(), d.expected_tail(pi, TailSide::Upper)?.to_string()])?;

    let mut header = vec!["tau".to_string(), "intercept".to_string()];
    header.extend(ds.covariate_names.iter().cloned());
    header.push("fitted_at_x0".into());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut g = Table::create(out, "baseline_grid.csv", &refs)?;
    let fitted = grid.quantiles_at(&x0)?;
    for (i, b) in grid.betas.iter().enumerate() {
        let mut row = vec![grid.taus[i].to_string()];
        row.extend(b.iter().map(f64::to_string));
        row.push(fitted[i].to_string());
        g.row(row)?;
    }
    Ok(vec![t.finish()?, g.finish()?])
}

enum AnyDesign {
    Skew(DgpSpec),
    Pareto(ParetoDesign),
}

impl AnyDesign {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "pareto" => Ok(AnyDesign::Pareto(ParetoDesign::default())),
            other => other
                .parse()
                .map(|l| AnyDesign::Skew(DgpSpec::from_label(l)))
                .map_err(|_| usage("design", format!("expected `quarter`, `year` or `pareto`, got `{other}`"))),
        }
    }

    fn design(&self) -> &dyn Design {
        match self {
            AnyDesign::Skew(d) => d,
            AnyDesign::Pareto(d) => d,
        }
    }
}

pub fn simulate(a: &SimulateArgs, out: &Path) -> Files {
    let design = AnyDesign::parse(&a.design)?;
    let seed = seed(a.seed)?;
    let d = design.design();
    let h = a.horizon.unwrap_or_else(|| d.horizon());
    if a.t <= h {
        return Err(usage("T", format!("series length must exceed the horizon {h}")));
    }
    let ds = sample_series(d, a.t, h, seed)?;
    let path = out.join("simulated.csv");
    Ok(vec![core_write(path.clone(), ds.write_csv(&path))?])
}

pub fn monte_carlo(a: &McArgs, out: &Path) -> Files {
    let design = AnyDesign::parse(&a.design)?;
    let seed = seed(a.seed)?;
    if a.reps < 2 {
        return Err(usage("reps", "need at least 2 replications"));
    }
    let sizes = parse_list("T", &a.t)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(usage("T", format!("`{v}` is not a positive integer")))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut targets: Vec<Target> = probabilities("tau", &a.tau)?.into_iter().map(Target::Quantile).collect();
    if a.pi != "none" {
        let pi = probability("pi", parse_list("pi", &a.pi)?[0])?;
        if pi >= 0.5 {
            return Err(usage("pi", "must be below 0.5"));
        }
        targets.push(Target::Shortfall(pi));
        targets.push(Target::Longrise(pi));
    }
    let methods = a
        .methods
        .split(',')
        .map(|m| m.trim().parse::<Method>().map_err(|e| usage("methods", e)))
        .collect::<Result<Vec<_>, _>>()?;
    let d = design.design();
    let x0 = match &a.x0 {
        Some(s) => {
            let v = parse_list("x0", s)?;
            if v.len() != d.dim_x() {
                return Err(usage("x0", format!("{} values given for {} covariates", v.len(), d.dim_x())));
            }
            Some(v)
        }
        None => None,
    };
    let config = McConfig {
        targets,
        sample_sizes: sizes,
        reps: a.reps,
        seed,
        methods,
        x0,
        new_method: new_config(&a.new, ThresholdRule::RuleOfThumb)?,
    };
    let summary = run_monte_carlo(d, &config)?;
    let path = out.join("mc_summary.csv");
    let mut files = vec![core_write(path.clone(), summary.write_csv(&path))?];
    for (tail, pred) in [("lower", (|t: f64| t < 0.5) as fn(f64) -> bool), ("upper", |t: f64| t > 0.5)] {
        if !config.targets.iter().any(|t| matches!(t, Target::Quantile(x) if pred(*x))) {
            continue;
        }
        let (rmse, bands) = mc_charts(&summary, &config, pred, tail);
        files.push(svg(rmse, out.join(format!("mc_rmse_{tail}.svg")))?);
        files.push(svg(bands, out.join(format!("mc_bands_{tail}.svg")))?);
    }
    Ok(files)
}

fn mc_charts(summary: &McSummary, config: &McConfig, keep: fn(f64) -> bool, tail: &str) -> (Chart, Chart) {
    let mut rmse = Chart::new(format!("RMSE of {tail}-tail quantiles"), "tau", "RMSE");
    let mut bands = Chart::new(
        format!("Mean and Gaussian interquartile range, {tail} tail"),
        "tau",
        "quantile",
    );
    let mut truth = Vec::new();
    for &m in &config.methods {
        for &n in &config.sample_sizes {
            let rows: Vec<_> = summary
                .rows
                .iter()
                .filter(|r| r.method == m && r.sample_size == n)
                .filter_map(|r| match r.target {
                    Target::Quantile(t) if keep(t) => Some((t, r)),
                    _ => None,
                })
                .collect();
            let label = format!("{m} T={n}");
            let stroke = if m == Method::New { Stroke::Solid } else { Stroke::Dashed };
            rmse = rmse.line(label.clone(), rows.iter().map(|(t, r)| (*t, r.rmse)).collect(), stroke);
            bands = bands.band(
                format!("{label} IQR"),
                rows.iter().map(|(t, _)| *t).collect(),
                rows.iter().map(|(_, r)| r.iqr_lo).collect(),
                rows.iter().map(|(_, r)| r.iqr_hi).collect(),
            );
            truth = rows.iter().map(|(t, r)| (*t, r.truth)).collect();
        }
    }
    bands = bands.line("truth", truth, Stroke::Dots);
    (rmse, bands)
}

pub fn backtest(a: &BacktestArgs, out: &Path) -> Files {
    let lower_tau = probability("lower-tau", a.lower_tau)?;
    let upper_tau = probability("upper-tau", a.upper_tau)?;
    if lower_tau >= 0.5 || upper_tau <= 0.5 {
        return Err(usage("lower-tau", "lower level must be below 0.5 and upper level above"));
    }
    let config = BacktestConfig {
        lower_tau,
        upper_tau,
        new_method: new_config(&a.new, ThresholdRule::DataDriven(None))?,
        include_old: !a.no_old,
    };
    let (ds, _) = load(&a.data)?;
    let report = expanding_backtest(&ds, a.data.horizon, a.min_train, &config)?;
    let counted = match (&a.from, &a.to) {
        (None, None) => report.clone(),
        (from, to) => {
            let first = report.rows.first().map(|r| r.target_label.clone()).unwrap_or_default();
            let last = report.rows.last().map(|r| r.target_label.clone()).unwrap_or_default();
            report.restrict_targets(from.as_deref().unwrap_or(&first), to.as_deref().unwrap_or(&last))
        }
    };
    if counted.rows.is_empty() {
        return Err(usage("from", "no prediction falls inside the requested range"));
    }
    let table = coverage_table(&counted);

    let mut files = Vec::new();
    let p = out.join("backtest.csv");
    files.push(core_write(p.clone(), report.write_csv(&p))?);
    let p = out.join("coverage.csv");
    files.push(core_write(p.clone(), table.write_csv(&p))?);
    let p = out.join("coverage.txt");
    std::fs::write(&p, format!("{table}\n")).map_err(|source| CliError::Io {
        path: p.clone(),
        source,
    })?;
    files.push(p);

    let x: Vec<f64> = report.rows.iter().map(|r| r.origin as f64).collect();
    let series = |f: &dyn Fn(&gar_core::backtest::BacktestRow) -> Option<f64>| -> Vec<(f64, f64)> {
        report.rows.iter().zip(&x).map(|(r, &t)| (t, f(r).unwrap_or(f64::NAN))).collect()
    };
    let mut chart = Chart::new(
        format!("Out-of-sample {}% and {}% predictions", 100.0 * lower_tau, 100.0 * upper_tau),
        "forecast origin (period)",
        ds.response_name.clone(),
    )
    .line("realized", series(&|r| Some(r.realized)), Stroke::Dots)
    .line("New lower", series(&|r| r.new.lower), Stroke::Solid)
    .line("New upper", series(&|r| r.new.upper), Stroke::Solid);
    if config.include_old {
        chart = chart
            .line("Old lower", series(&|r| r.old.lower), Stroke::Dashed)
            .line("Old upper", series(&|r| r.old.upper), Stroke::Dashed);
    }
    files.push(svg(chart, out.join("backtest.svg"))?);
    Ok(files)
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| usage("grid", format!("`{p}` is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    match nums[..] {
        [a, b, step] if step > 0.0 && b > a => {
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + step * i as f64).collect())
        }
        _ => Err(usage("grid", "expected from:to:step with from < to and step > 0")),
    }
}

pub fn scenario(a: &ScenarioArgs, out: &Path) -> Files {
    let tail = side("tail", &a.tail)?;
    let lower_tau = probability("lower-tau", a.lower_tau)?;
    let upper_tau = probability("upper-tau", a.upper_tau)?;
    let config = BacktestConfig {
        lower_tau,
        upper_tau,
        new_method: new_config(&a.new, ThresholdRule::DataDriven(None))?,
        include_old: true,
    };
    let (ds, pairs) = load(&a.data)?;
    let x0 = point("x0", &a.x0, &ds, &pairs)?;
    let grid = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => {
            let lo = pairs.y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = pairs.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let med = gar_core::stats::median(&pairs.y);
            let (a, b) = match tail {
                TailSide::Lower => (lo - 0.25 * (hi - lo), med),
                TailSide::Upper => (med, hi + 0.25 * (hi - lo)),
            };
            (0..=200).map(|i| a + (b - a) * i as f64 / 200.0).collect()
        }
    };
    let sd = scenario_density(&ds, a.data.horizon, &x0, tail, &grid, &config)?;

    let mut files = Vec::new();
    let p = out.join("scenario_density.csv");
    files.push(core_write(p.clone(), sd.write_csv(&p))?);
    let mut m = Table::create(
        out,
        "scenario_markers.csv",
        &["method", "level", "quantile", "threshold", "tail_mass", "v_at_x0"],
    )?;
    let level = match tail {
        TailSide::Lower => lower_tau,
        TailSide::Upper => upper_tau,
    };
    m.row(["Old".into(), level.to_string(), sd.old_marker.to_string(), String::new(), String::new(), String::new()])?;
    m.row([
        "New".into(),
        level.to_string(),
        sd.new_marker.to_string(),
        sd.new_tail.threshold.to_string(),
        sd.new_tail.tail_mass.to_string(),
        sd.new_tail.v.to_string(),
    ])?;
    files.push(m.finish()?);

    let pts = |d: &[f64]| -> Vec<(f64, f64)> {
        grid.iter()
            .zip(d)
            .map(|(&y, &v)| (y, if v > 0.0 { v } else { f64::NAN }))
            .collect()
    };
    let chart = Chart::new(format!("{tail} tail densities at the scenario"), ds.response_name.clone(), "density")
        .line("Old", pts(&sd.old), Stroke::Dashed)
        .line("New", pts(&sd.new), Stroke::Solid)
        .marker(format!("Old {:.1}%", 100.0 * level), sd.old_marker)
        .marker(format!("New {:.1}%", 100.0 * level), sd.new_marker);
    files.push(svg(chart, out.join("scenario.svg"))?);
    Ok(files)
}
