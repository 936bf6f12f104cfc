//! Acceptance checks A1 to A10, one status line each.
//!
//! The binary exits 0 after reporting so that the workspace test run stays
//! usable while a check fails; set `GAR_ACCEPTANCE_STRICT=1` to turn any
//! failure into a non-zero exit. A9's historical-data comparison runs only
//! when `GAR_HISTORICAL_CSV` points at the quarterly dataset.

use std::time::Instant;

use gar_core::backtest::{coverage_table, expanding_backtest, scenario_density, BacktestConfig};
use gar_core::methods::{fit_new_tail, new_kernel, Method, NewMethodConfig, ThresholdRule};
use gar_core::simulation::{
    run_monte_carlo, sample_series, Design, DgpSpec, McConfig, ParetoDesign, SplicedParetoDesign, Target,
};
use gar_core::tail_index::{default_threshold, tail_gradient};
use gar_core::threshold::default_grid;
use gar_core::{
    extreme_quantile, fit_tail_index, load_dataset, select_threshold, tail_objective, PredictorResponsePairs,
    RowMatrix, Schema, SkewT, SkewTParams, TailSide,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn judge(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        status: if pass { Status::Pass } else { Status::Fail },
        detail: detail.into(),
    }
}

fn sample_median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Intercept-only fits against the closed-form Hill ratio.
fn a1_hill_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..25 {
        let n = 50 + 37 * case;
        let shape = rng.random_range(0.8..6.0);
        let y: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random_range(1e-9..1.0);
                let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                s * u.powf(-1.0 / shape) + rng.random_range(-0.5..0.5)
            })
            .collect();
        let pairs = PredictorResponsePairs::from_covariates(&RowMatrix::new(n, 0, vec![]).unwrap(), y.clone(), 1)
            .unwrap();
        let med = sample_median(&y);
        for side in [TailSide::Upper, TailSide::Lower] {
            let thr = default_threshold(&pairs, side);
            let logs: Vec<f64> = y
                .iter()
                .filter(|&&v| match side {
                    TailSide::Upper => v >= thr,
                    TailSide::Lower => v <= thr,
                })
                .map(|&v| ((v - med) / (thr - med)).ln())
                .collect();
            let oracle = logs.len() as f64 / logs.iter().sum::<f64>();
            let fit = fit_tail_index(&pairs, side, thr).unwrap();
            worst = worst.max((fit.beta[0].exp() / oracle - 1.0).abs());
        }
    }
    judge(worst < 1e-8, format!("max relative gap {worst:.2e} over 50 fits"))
}

/// Analytic gradient against central differences.
fn a2_gradient_check() -> Outcome {
    let design = ParetoDesign {
        tail_prob: 0.15,
        log_v: [0.5, 0.3],
    };
    let pairs_1 = design.sample_pairs(800, 2).unwrap();
    let pairs_2 = DgpSpec::quarter_ahead().sample_pairs(800, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for pairs in [&pairs_1, &pairs_2] {
        let med = sample_median(&pairs.y);
        for side in [TailSide::Upper, TailSide::Lower] {
            let thr = default_threshold(pairs, side);
            for _ in 0..10 {
                let beta: Vec<f64> = (0..pairs.dim_beta()).map(|_| rng.random_range(-0.6..0.6)).collect();
                let g = tail_gradient(&beta, pairs, side, thr, med).unwrap();
                let mut num = vec![0.0; beta.len()];
                for k in 0..beta.len() {
                    let step = 1e-5 * beta[k].abs().max(1.0);
                    let (mut up, mut dn) = (beta.clone(), beta.clone());
                    up[k] += step;
                    dn[k] -= step;
                    let fu = tail_objective(&up, pairs, side, thr, med).unwrap();
                    let fd = tail_objective(&dn, pairs, side, thr, med).unwrap();
                    num[k] = (fu - fd) / (2.0 * step);
                }
                let diff: f64 = g.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale: f64 = num.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-8);
                worst = worst.max(diff / scale);
                points += 1;
            }
        }
    }
    judge(worst < 1e-5, format!("max relative error {worst:.2e} at {points} points"))
}

/// Coefficient recovery under a correctly specified Pareto tail.
fn a3_consistency() -> Outcome {
    let truth = [0.5, 0.3];
    let design = ParetoDesign {
        tail_prob: 0.15,
        log_v: truth,
    };
    let reps = 100;
    let mut abs_err = [[0.0; 2]; 2];
    for r in 0..reps {
        let pairs = design.sample_pairs(5000, 3000 + r).unwrap();
        for (s, side) in [TailSide::Upper, TailSide::Lower].into_iter().enumerate() {
            let fit = fit_tail_index(&pairs, side, default_threshold(&pairs, side)).unwrap();
            for k in 0..2 {
                abs_err[s][k] += (fit.beta[k] - truth[k]).abs() / reps as f64;
            }
        }
    }
    let worst = abs_err.iter().flatten().cloned().fold(0.0, f64::max);
    judge(
        worst < 0.1,
        format!(
            "mean |beta_hat - beta|: upper ({:.4}, {:.4}), lower ({:.4}, {:.4})",
            abs_err[0][0], abs_err[0][1], abs_err[1][0], abs_err[1][1]
        ),
    )
}

/// Ratio of expected longrise to quantile against `nu / (nu - 1)`.
fn a4_longrise_ratio() -> Outcome {
    let pi = 1e-4;
    let mut worst: f64 = 0.0;
    for nu in [3.0, 5.0, 11.107] {
        for alpha in [-1.0, 0.0, 2.0] {
            let d = SkewT::new(SkewTParams::new(0.0, 1.0, alpha, nu).unwrap()).unwrap();
            let ratio = d.expected_tail(pi, TailSide::Upper).unwrap() / d.quantile(1.0 - pi).unwrap();
            worst = worst.max((ratio / (nu / (nu - 1.0)) - 1.0).abs());
        }
    }
    judge(worst < 0.05, format!("max relative deviation {:.2}%", 100.0 * worst))
}

/// Out-of-sample accuracy of both methods in the quarter-ahead design.
fn a5_rmse_direction() -> Outcome {
    let taus = [0.01, 0.02, 0.03, 0.97, 0.98, 0.99];
    let config = McConfig {
        targets: taus.iter().map(|&t| Target::Quantile(t)).collect(),
        sample_sizes: vec![300],
        reps: 200,
        seed: 5_000,
        methods: vec![Method::New, Method::Old],
        x0: None,
        new_method: NewMethodConfig::default(),
    };
    let summary = run_monte_carlo(&DgpSpec::quarter_ahead(), &config).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in config.targets {
        let new = summary.row(Method::New, t, 300).unwrap();
        let old = summary.row(Method::Old, t, 300).unwrap();
        pass &= new.rmse < old.rmse;
        parts.push(format!("{}: {:.3} vs {:.3}", t, new.rmse, old.rmse));
        if new.failures + old.failures > 0 {
            parts.push(format!("(failures {}/{})", new.failures, old.failures));
        }
    }
    judge(pass, format!("RMSE New vs Old; {}", parts.join(", ")))
}

/// Empirical coverage of the nominal 90% interval for an extreme quantile.
fn a6_interval_coverage() -> Outcome {
    let design = ParetoDesign::constant(3.0);
    let tau = 0.99;
    let truth = design.true_quantile(&[0.0], tau).unwrap();
    let reps = 300;
    let z = 1.6448536269514722;
    let cfg = NewMethodConfig::default();
    let mut covered = 0;
    for r in 0..reps {
        let pairs = design.sample_pairs(2000, 6_000 + r).unwrap();
        let kernel = new_kernel(&pairs, &cfg).unwrap();
        let fit = fit_new_tail(&pairs, TailSide::Upper, &cfg).unwrap();
        let est = extreme_quantile(&fit, &pairs, &[0.0], tau, &kernel).unwrap();
        let (lo, hi) = est.interval(z);
        covered += usize::from(lo <= truth && truth <= hi);
    }
    let rate = covered as f64 / reps as f64;
    judge(
        (0.84..=0.96).contains(&rate),
        format!("coverage {:.3} ({covered}/{reps}) at tau {tau}, target [0.84, 0.96]", rate),
    )
}

/// Skew-t quantile, expected tail and equivariance checks.
fn a7_skewt_machinery() -> Outcome {
    let mut round_trip: f64 = 0.0;
    for &alpha in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
        for &nu in &[1.5, 3.0, 8.0, 40.0] {
            let d = SkewT::new(SkewTParams::new(0.4, 1.7, alpha, nu).unwrap()).unwrap();
            for &tau in &[1e-4, 0.01, 0.05, 0.3, 0.5, 0.8, 0.95, 0.999] {
                let q = d.quantile(tau).unwrap();
                round_trip = round_trip.max((d.cdf(q).unwrap() - tau).abs());
            }
        }
    }
    let normal = SkewT::new(SkewTParams::new(0.0, 1.0, 0.0, 1e4).unwrap()).unwrap();
    let sf = normal.expected_tail(0.05, TailSide::Lower).unwrap();

    let mut equivariance: f64 = 0.0;
    let base = SkewT::new(SkewTParams::new(0.0, 1.0, 0.8, 6.0).unwrap()).unwrap();
    for &(mu, sigma) in &[(2.0, 1.5), (-3.0, 0.4), (0.5, 7.0)] {
        let moved = SkewT::new(SkewTParams::new(mu, sigma, 0.8, 6.0).unwrap()).unwrap();
        for &tau in &[0.02, 0.5, 0.9] {
            let gap = moved.quantile(tau).unwrap() - (mu + sigma * base.quantile(tau).unwrap());
            equivariance = equivariance.max(gap.abs());
        }
    }
    judge(
        round_trip < 1e-8 && (sf + 2.0627).abs() < 1e-2 && equivariance < 1e-10,
        format!("round trip {round_trip:.1e}, normal-limit shortfall {sf:.4}, equivariance {equivariance:.1e}"),
    )
}

/// Data-driven threshold against the spliced design's splice point.
fn a8_threshold_selector() -> Outcome {
    let design = SplicedParetoDesign::default();
    let seeds = 50;
    let mut hits = 0;
    for seed in 0..seeds {
        let pairs = design.sample_pairs(2000, 8_000 + seed).unwrap();
        let r = select_threshold(&pairs, TailSide::Upper, &default_grid(TailSide::Upper)).unwrap();
        hits += usize::from(r.chosen >= design.splice);
    }
    let rate = hits as f64 / seeds as f64;
    judge(rate >= 0.8, format!("threshold at or above the splice in {hits}/{seeds} seeds"))
}

/// Expanding-window breach frequencies on a synthetic series.
fn a9_backtest_coverage() -> Outcome {
    let series = sample_series(&ParetoDesign::constant(3.0), 3000, 4, 9_000).unwrap();
    let config = BacktestConfig {
        include_old: false,
        ..BacktestConfig::default()
    };
    let report = expanding_backtest(&series, 4, 300, &config).unwrap();
    let table = coverage_table(&report);
    let new = table.method(Method::New).unwrap();
    let ok = |f: f64| (f - 0.05).abs() <= 0.02;
    let synthetic = ok(new.below.frequency()) && ok(new.above.frequency());
    judge(
        synthetic,
        format!("synthetic T=3000: below {}, above {}, excluded {}", new.below, new.above, new.excluded),
    )
}

fn a9_historical() -> Outcome {
    match std::env::var("GAR_HISTORICAL_CSV") {
        Ok(path) => match historical(&path) {
            Ok((pass, d)) => judge(pass, d),
            Err(e) => judge(false, format!("historical dataset: {e}")),
        },
        Err(_) => Outcome {
            status: Status::Skip,
            detail: "GAR_HISTORICAL_CSV unset; published table and scenario values not checked".into(),
        },
    }
}

/// Columns: `date`, `y` (growth), then current growth and the financial
/// conditions index, in that order.
fn historical(path: &str) -> Result<(bool, String), String> {
    let ds = load_dataset(path, &Schema::default()).map_err(|e| e.to_string())?;
    let env_usize = |k: &str, d: usize| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    let h = env_usize("GAR_HISTORICAL_H", 4);
    let min_train = env_usize("GAR_HISTORICAL_MIN_TRAIN", 8);
    let config = BacktestConfig::default();
    let report = expanding_backtest(&ds, h, min_train, &config).map_err(|e| e.to_string())?;
    let table = coverage_table(&report);
    let published = [
        (Method::Old, 0.033, 0.023),
        (Method::New, 0.053, 0.045),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, below, above) in published {
        let row = table.method(m).ok_or("missing method")?;
        pass &= (row.below.frequency() - below).abs() <= 0.003 && (row.above.frequency() - above).abs() <= 0.003;
        parts.push(format!("{m} {} / {}", row.below, row.above));
    }
    let growth: Vec<f64> = ds.x.column(0).collect();
    let fci: Vec<f64> = ds.x.column(1).collect();
    let crisis = ds
        .timestamps
        .iter()
        .position(|t| t == "2008Q4")
        .map(|i| fci[i])
        .ok_or("no 2008Q4 row")?;
    let grid: Vec<f64> = (0..200).map(|i| -20.0 + 0.1 * i as f64).collect();
    for (name, fci_value, old_ref, new_ref) in [
        ("median FCI", sample_median(&fci), -2.6, -1.4),
        ("2008Q4 FCI", crisis, -10.2, -4.6),
    ] {
        let x = [sample_median(&growth), fci_value];
        let sd = scenario_density(&ds, h, &x, TailSide::Lower, &grid, &config).map_err(|e| e.to_string())?;
        pass &= (sd.old_marker - old_ref).abs() <= 0.3 && (sd.new_marker - new_ref).abs() <= 0.3;
        parts.push(format!("{name}: Old {:.2}, New {:.2}", sd.old_marker, sd.new_marker));
    }
    Ok((pass, parts.join(", ")))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

/// Byte-identical outputs from one and several worker threads.
fn a10_determinism() -> Outcome {
    let mc = || {
        let config = McConfig {
            targets: vec![Target::Quantile(0.05), Target::Quantile(0.99), Target::Shortfall(0.05)],
            sample_sizes: vec![200],
            reps: 6,
            seed: 10,
            methods: vec![Method::New, Method::Old],
            x0: None,
            new_method: NewMethodConfig::default(),
        };
        let mut buf = Vec::new();
        run_monte_carlo(&DgpSpec::year_ahead(), &config).unwrap().write_to(&mut buf).unwrap();
        buf
    };
    let backtest = || {
        let ds = sample_series(&DgpSpec::quarter_ahead(), 220, 4, 10).unwrap();
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let report = expanding_backtest(&ds, 4, 205, &BacktestConfig::default()).unwrap();
        report.write_to(&mut buf).unwrap();
        coverage_table(&report).write_to(&mut buf).unwrap();
        buf
    };
    let thresholds = || {
        let cfg = NewMethodConfig {
            thresholds: ThresholdRule::DataDriven(None),
            ..NewMethodConfig::default()
        };
        let pairs = DgpSpec::quarter_ahead().sample_pairs(1500, 10).unwrap();
        format!("{:?}", fit_new_tail(&pairs, TailSide::Lower, &cfg).unwrap()).into_bytes()
    };
    let mut same = true;
    let mut sizes = Vec::new();
    for (name, job) in [
        ("monte carlo", &mc as &(dyn Fn() -> Vec<u8> + Sync)),
        ("backtest", &backtest),
        ("threshold search", &thresholds),
    ] {
        let one = in_pool(1, job);
        let many = in_pool(4, job);
        same &= one == many;
        sizes.push(format!("{name} {} bytes", one.len()));
    }
    judge(same, format!("1 vs 4 threads identical: {}", sizes.join(", ")))
}

fn main() {
    let checks: [(&str, &str, fn() -> Outcome); 11] = [
        ("A1", "Hill equivalence", a1_hill_equivalence),
        ("A2", "gradient check", a2_gradient_check),
        ("A3", "coefficient consistency", a3_consistency),
        ("A4", "longrise to quantile ratio", a4_longrise_ratio),
        ("A5", "RMSE New < Old", a5_rmse_direction),
        ("A6", "interval coverage", a6_interval_coverage),
        ("A7", "skew-t machinery", a7_skewt_machinery),
        ("A8", "threshold selector", a8_threshold_selector),
        ("A9", "backtest coverage", a9_backtest_coverage),
        ("A9", "historical table and scenarios", a9_historical),
        ("A10", "determinism across threads", a10_determinism),
    ];
    let only: Option<Vec<String>> = std::env::args()
        .skip(1)
        .filter(|a| a.starts_with('A'))
        .map(|a| Some(a.to_uppercase()))
        .collect();
    let only = only.filter(|v| !v.is_empty());
    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for (id, name, check) in checks {
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let label = match outcome.status {
            Status::Pass => {
                passed += 1;
                "PASS"
            }
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => {
                skipped += 1;
                "SKIP"
            }
        };
        println!(
            "{label} {id:<3} {name}: {} [{:.1}s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed > 0 && std::env::var("GAR_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
