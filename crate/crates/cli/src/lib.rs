//! `gar`: tail-index and skew-t Growth-at-Risk estimates, simulations and
//! backtests from the command line.
//!
//! Every command writes CSV files into `--out`; `mc`, `backtest` and
//! `scenario` also draw SVG views of those files. Exit status is 0 on
//! success, 2 for usage errors, 3 for unreadable or malformed data and 4
//! for numerical failures.

mod commands;
pub mod config;
mod error;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gar", version, about = "Growth-at-Risk with tail-index regression", args_override_self = true)]
pub struct Cli {
    /// File of `key = value` lines supplying flags; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory receiving the output files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extreme quantiles and expected shortfall/longrise with standard errors.
    Fit(FitArgs),
    /// Discrepancy-based threshold search over a grid of quantile levels.
    SelectThreshold(SelectArgs),
    /// Skew-t matched to five regression quantiles.
    Baseline(BaselineArgs),
    /// Draw a synthetic series from a simulation design.
    Simulate(SimulateArgs),
    /// Monte Carlo comparison of the two methods.
    Mc(McArgs),
    /// Expanding-window out-of-sample backtest with breach counts.
    Backtest(BacktestArgs),
    /// Tail densities of both methods under a covariate scenario.
    Scenario(ScenarioArgs),
}

pub const SUBCOMMANDS: [&str; 7] = ["fit", "select-threshold", "baseline", "simulate", "mc", "backtest", "scenario"];

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV with a timestamp column, the response and covariates.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "date")]
    pub date_column: String,
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Comma-separated covariate columns; all remaining columns if omitted.
    #[arg(long)]
    pub covariates: Option<String>,
    /// Forecast horizon h: `Y_{t+h}` is paired with `X_t`.
    #[arg(long, default_value_t = 4)]
    pub horizon: usize,
}

#[derive(Debug, Args)]
pub struct NewArgs {
    /// `rule` (90%/10% empirical quantiles) or `data-driven`.
    #[arg(long)]
    pub threshold: Option<String>,
    /// `gaussian` or `epanechnikov`.
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    /// Multiplier on the rule-of-thumb bandwidths.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_scale: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub new: NewArgs,
    /// `lower` or `upper`.
    #[arg(long, default_value = "lower")]
    pub tail: String,
    /// Comma-separated quantile levels in the chosen tail.
    #[arg(long)]
    pub tau: Option<String>,
    /// `sample-mean`, `sample-median` or comma-separated covariate values.
    #[arg(long, default_value = "sample-mean")]
    pub x0: String,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "upper")]
    pub tail: String,
    /// Comma-separated empirical quantile levels; the default grid if omitted.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "sample-mean")]
    pub x0: String,
    /// Quantile levels reported from the fitted skew-t.
    #[arg(long, default_value = "0.05,0.25,0.5,0.75,0.95")]
    pub tau: String,
    /// Tail probability of the reported expected shortfall and longrise.
    #[arg(long, default_value_t = 0.05)]
    pub pi: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `quarter`, `year` or `pareto`.
    #[arg(long, default_value = "quarter")]
    pub design: String,
    #[arg(long = "T", default_value_t = 300)]
    pub t: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lag between covariates and response; the design's own horizon if omitted.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub new: NewArgs,
    #[arg(long, default_value = "quarter")]
    pub design: String,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Comma-separated sample sizes.
    #[arg(long = "T", default_value = "300")]
    pub t: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated quantile levels.
    #[arg(long, default_value = "0.01,0.02,0.03,0.04,0.05,0.95,0.96,0.97,0.98,0.99")]
    pub tau: String,
    /// Tail probability for expected shortfall and longrise; `none` to skip.
    #[arg(long, default_value = "0.05")]
    pub pi: String,
    /// Comma-separated subset of `new,old`.
    #[arg(long, default_value = "new,old")]
    pub methods: String,
    /// Comma-separated conditioning point; the covariate mean if omitted.
    #[arg(long)]
    pub x0: Option<String>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub new: NewArgs,
    #[arg(long, default_value_t = 32)]
    pub min_train: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lower_tau: f64,
    #[arg(long, default_value_t = 0.95)]
    pub upper_tau: f64,
    /// Skip the skew-t baseline.
    #[arg(long)]
    pub no_old: bool,
    /// Count breaches only for target periods at or after this label.
    #[arg(long)]
    pub from: Option<String>,
    /// Count breaches only for target periods at or before this label.
    #[arg(long)]
    pub to: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub new: NewArgs,
    /// `sample-mean`, `sample-median` or comma-separated covariate values.
    #[arg(long, default_value = "sample-median")]
    pub x0: String,
    #[arg(long, default_value = "lower")]
    pub tail: String,
    /// Response grid `from:to:step`; spans the observed tail if omitted.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub lower_tau: f64,
    #[arg(long, default_value_t = 0.95)]
    pub upper_tau: f64,
}

/// Parse `argv`, run the command, report on stdout/stderr and return the
/// process exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::expand(argv, &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(&cli.out).map_err(|source| CliError::Io {
        path: cli.out.clone(),
        source,
    })?;
    let out = cli.out.clone();
    let job = move || match &cli.command {
        Command::Fit(a) => commands::fit(a, &out),
        Command::SelectThreshold(a) => commands::select(a, &out),
        Command::Baseline(a) => commands::baseline(a, &out),
        Command::Simulate(a) => commands::simulate(a, &out),
        Command::Mc(a) => commands::monte_carlo(a, &out),
        Command::Backtest(a) => commands::backtest(a, &out),
        Command::Scenario(a) => commands::scenario(a, &out),
    };
    match cli.threads {
        Some(0) => Err(error::usage("threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| error::usage("threads", e))?
            .install(job),
        None => job(),
    }
}
