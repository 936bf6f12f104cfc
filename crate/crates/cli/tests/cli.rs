use std::path::Path;
use std::process::{Command, Output};

fn gar(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gar"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = gar(out, args);
    assert!(
        o.status.success(),
        "gar {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn simulated(dir: &Path, design: &str, t: &str) -> String {
    ok(dir, &["simulate", "--design", design, "--T", t, "--seed", "11"]);
    dir.join("simulated.csv").to_str().unwrap().to_string()
}

fn same_files(a: &Path, b: &Path, names: &[&str]) {
    for n in names {
        let x = std::fs::read(a.join(n)).unwrap();
        let y = std::fs::read(b.join(n)).unwrap();
        assert!(x == y, "{n} differs between thread counts");
    }
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &["--threads", "1", "simulate", "--T", "150", "--seed", "5"]);
    ok(b.path(), &["--threads", "4", "simulate", "--T", "150", "--seed", "5"]);
    same_files(a.path(), b.path(), &["simulated.csv"]);
    let text = std::fs::read_to_string(a.path().join("simulated.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("date,y,x1,x2"));
    assert_eq!(text.lines().count(), 151);
}

#[test]
fn monte_carlo_summary_schema_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["mc", "--reps", "6", "--T", "150,200", "--seed", "2", "--tau", "0.02,0.98"];
    let mut one = vec!["--threads", "1"];
    one.extend(args);
    let mut four = vec!["--threads", "4"];
    four.extend(args);
    ok(a.path(), &one);
    ok(b.path(), &four);
    same_files(a.path(), b.path(), &["mc_summary.csv"]);

    let text = std::fs::read_to_string(a.path().join("mc_summary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,target,T,mean,iqr_lo,iqr_hi,rmse,truth,failures"));
    // 2 methods x 2 sizes x (2 quantiles + shortfall + longrise).
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.split(',').count() == 9));
    for svg in ["mc_rmse_lower.svg", "mc_bands_upper.svg"] {
        let s = std::fs::read_to_string(a.path().join(svg)).unwrap();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn backtest_is_reproducible_across_thread_counts() {
    let data = tempfile::tempdir().unwrap();
    let input = simulated(data.path(), "pareto", "140");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["backtest", "--input", &input, "--horizon", "1", "--min-train", "120", "--threshold", "rule"];
    let mut one = vec!["--threads", "1"];
    one.extend(args);
    let mut four = vec!["--threads", "4"];
    four.extend(args);
    ok(a.path(), &one);
    ok(b.path(), &four);
    same_files(a.path(), b.path(), &["backtest.csv", "coverage.csv", "coverage.txt"]);
    let report = std::fs::read_to_string(a.path().join("backtest.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 140 - 120);
    let coverage = std::fs::read_to_string(a.path().join("coverage.txt")).unwrap();
    assert!(coverage.contains("New") && coverage.contains("Old"));
}

#[test]
fn out_of_range_tau_names_the_flag() {
    let data = tempfile::tempdir().unwrap();
    let input = simulated(data.path(), "quarter", "120");
    let o = gar(data.path(), &["fit", "--input", &input, "--tau", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--tau"));

    let o = gar(data.path(), &["fit", "--input", &input, "--tail", "upper", "--tau", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--tau"));
}

#[test]
fn fit_reports_each_level() {
    let data = tempfile::tempdir().unwrap();
    let input = simulated(data.path(), "pareto", "400");
    ok(
        data.path(),
        &["fit", "--input", &input, "--horizon", "1", "--tail", "upper", "--tau", "0.97,0.99"],
    );
    let text = std::fs::read_to_string(data.path().join("estimates.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[0], "upper");
        assert_eq!(r.last(), Some(&"ok"));
        let q: f64 = r[2].parse().unwrap();
        let se: f64 = r[3].parse().unwrap();
        assert!(q.is_finite() && se > 0.0);
    }
    let q97: f64 = rows[0][2].parse().unwrap();
    let q99: f64 = rows[1][2].parse().unwrap();
    assert!(q99 > q97);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gar(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let o = gar(dir.path(), &["simulate", "--T", "50"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    assert_eq!(gar(dir.path(), &["mc", "--seed", "1", "--design", "monthly"]).status.code(), Some(2));
    assert_eq!(gar(dir.path(), &["--threads", "0", "simulate", "--seed", "1"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gar(dir.path(), &["fit", "--input", "/nonexistent/file.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# small run\nseed = 4\nT = 80\n").unwrap();
    let conf = conf.to_str().unwrap();

    ok(dir.path(), &["--config", conf, "simulate"]);
    let from_file = std::fs::read_to_string(dir.path().join("simulated.csv")).unwrap();
    assert_eq!(from_file.lines().count(), 81);

    ok(dir.path(), &["--config", conf, "simulate", "--T", "60"]);
    let overridden = std::fs::read_to_string(dir.path().join("simulated.csv")).unwrap();
    assert_eq!(overridden.lines().count(), 61);
    // Same seed: the first covariate draws agree, while responses are
    // drawn after all covariates and so depend on the length.
    let covariates = |t: &str| t.lines().nth(1).unwrap().split(',').skip(2).map(String::from).collect::<Vec<_>>();
    assert_eq!(covariates(&from_file), covariates(&overridden));
}

#[test]
fn scenario_writes_densities_and_markers() {
    let data = tempfile::tempdir().unwrap();
    let input = simulated(data.path(), "pareto", "300");
    ok(
        data.path(),
        &["scenario", "--input", &input, "--horizon", "1", "--threshold", "rule", "--grid=-6:0:0.5"],
    );
    let dens = std::fs::read_to_string(data.path().join("scenario_density.csv")).unwrap();
    assert_eq!(dens.lines().next(), Some("y,density_old,density_new"));
    assert_eq!(dens.lines().count(), 1 + 13);
    let markers = std::fs::read_to_string(data.path().join("scenario_markers.csv")).unwrap();
    assert_eq!(markers.lines().count(), 3);
}
