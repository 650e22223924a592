//! `curecal`: population-adjusted cure rate and survival estimation from
//! historical control data, plus the Monte Carlo harness behind it.
//!
//! Exit codes: 0 success, 1 computation failure (solver, boundary, resampling),
//! 2 usage or input problems. Errors land on stderr as one JSON line.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "curecal",
    version,
    about = "Cure rate and survival estimation for historical controls, reweighted to a target trial population"
)]
struct Cli {
    /// Cap worker threads (default: all cores). Results never depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cure-rate estimates, optionally with bootstrap intervals
    Estimate(EstimateArgs),
    /// Survival curves on a time grid, product-limit and pseudo-observation based
    Curves(CurvesArgs),
    /// Balancing weights and their diagnostics
    Weights(WeightsArgs),
    /// Monte Carlo scenario grid from a config file
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Historical control cohort CSV
    #[arg(long)]
    historical: Option<PathBuf>,
    /// Target trial cohort CSV
    #[arg(long)]
    trial: Option<PathBuf>,
    /// TOML config: column names, optional default paths
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum WeightChoice {
    Maic,
    Ma,
    MaicMa,
    Ipw,
    None,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EstimatorChoice {
    Po,
    Pol,
    Km,
    Direct,
    All,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Weighting method
    #[arg(long, value_enum, default_value_t = WeightChoice::Maic)]
    weights: WeightChoice,
    /// Estimator to run
    #[arg(long, value_enum, default_value_t = EstimatorChoice::All)]
    estimator: EstimatorChoice,
    /// Bootstrap replicates; enables percentile intervals
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Confidence level for bootstrap intervals
    #[arg(long, default_value_t = 0.95)]
    ci: f64,
    /// RNG seed; required whenever the command draws random numbers
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (files are write-once)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Weighting method for the adjusted curves
    #[arg(long, value_enum, default_value_t = WeightChoice::Maic)]
    weights: WeightChoice,
    /// Comma-separated evaluation times; default: every distinct event time
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    times: Option<Vec<f64>>,
    /// Output directory (files are write-once)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Weighting method
    #[arg(long, value_enum)]
    weights: WeightChoice,
    /// Output directory (files are write-once)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config with [[scenario]] blocks
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base RNG seed; scenario k defaults to seed + k
    #[arg(long)]
    seed: Option<u64>,
    /// Default to 500 replicates per scenario instead of 2000
    #[arg(long)]
    fast: bool,
    /// Output directory (files are write-once)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(curecal::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<curecal::Error> for CliError {
    fn from(e: curecal::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        use curecal::Error::*;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Lib(e) => match e {
                Io { .. } => "io",
                MissingColumn(_) => "missing-column",
                Parse { .. } => "parse",
                InvalidRecord { .. } => "invalid-record",
                EmptyCohort => "empty-cohort",
                TooFewRecords(_) => "too-few-records",
                LengthMismatch { .. } => "length-mismatch",
                InvalidSpec(_) => "invalid-spec",
                ZeroRiskSet(_) => "zero-risk-set",
                Infeasible(_) => "infeasible",
                NoConvergence(_) => "no-convergence",
                RankDeficient(_) => "rank-deficient",
                LogitBoundary(_) => "logit-boundary",
                PropensityOverflow(_) => "propensity-overflow",
                TooManyFailures { .. } => "too-many-failures",
            },
        }
    }

    /// 2 for anything the user can fix in the invocation or input files,
    /// 1 for genuine computation failures.
    fn exit_code(&self) -> i32 {
        use curecal::Error::*;
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e {
                Io { .. } | MissingColumn(_) | Parse { .. } | InvalidRecord { .. }
                | EmptyCohort | TooFewRecords(_) | LengthMismatch { .. } | InvalidSpec(_) => 2,
                ZeroRiskSet(_) | Infeasible(_) | NoConvergence(_) | RankDeficient(_)
                | LogitBoundary(_) | PropensityOverflow(_) | TooManyFailures { .. } => 1,
            },
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
    }
}

fn main() {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = with_threads(threads, move || match &cli.command {
        Command::Estimate(args) => commands::cmd_estimate(args),
        Command::Curves(args) => commands::cmd_curves(args),
        Command::Weights(args) => commands::cmd_weights(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
    });
    if let Err(e) = result {
        let json = serde_json::json!({
            "error": { "kind": e.kind(), "message": e.to_string() }
        });
        eprintln!("{json}");
        std::process::exit(e.exit_code());
    }
}
