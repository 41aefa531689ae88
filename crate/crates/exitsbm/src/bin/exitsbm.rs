//! Command-line front end: graph generation, BP runs, density evolution,
//! EXIT curves, threshold scans, and the validation suite.
//!
//! Exit codes: 0 success, 1 validation/runtime failure, 2 usage or config
//! error.

use clap::{Args, Parser, Subcommand};
use exitsbm::cli::{self, RunConfig};
use exitsbm::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "exitsbm", version, about = "Belief propagation, density evolution, and EXIT charts for community detection with side information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Shared flags; every flag overrides the same-named config-file field.
#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// JSON config file; flags win over file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model: `symmetric` or `single`.
    #[arg(long)]
    model: Option<String>,
    /// Node count.
    #[arg(long)]
    n: Option<usize>,
    /// Within-community rate a (edge probability a/n).
    #[arg(long)]
    a: Option<f64>,
    /// Across-community rate b (edge probability b/n).
    #[arg(long)]
    b: Option<f64>,
    /// Signal strength mu = (a-b)/sqrt(b); with `b` it determines `a`.
    #[arg(long)]
    mu: Option<f64>,
    /// Community fraction K/n (single model).
    #[arg(long = "k-frac")]
    k_frac: Option<f64>,
    /// Community size K (single model).
    #[arg(long)]
    k: Option<usize>,
    /// Signal strength lambda = K^2 (p-q)^2 / ((n-K) q) (single model).
    #[arg(long)]
    lambda: Option<f64>,
    /// Rate ratio p/q used when solving rates from lambda.
    #[arg(long = "p-over-q")]
    p_over_q: Option<f64>,
    /// In-community edge probability p (single model).
    #[arg(long)]
    p: Option<f64>,
    /// Background edge probability q (single model).
    #[arg(long)]
    q: Option<f64>,
    /// Side-information flip probability alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Side-information observation probability epsilon (symmetric model).
    #[arg(long)]
    epsilon: Option<f64>,
    /// BP iterations / DE iteration cap.
    #[arg(long)]
    iters: Option<usize>,
    /// RNG seed (default 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (a run subdirectory is created inside).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid size for tables and curves.
    #[arg(long)]
    grid: Option<usize>,
    /// Tolerance (DE convergence / scan bracket width).
    #[arg(long)]
    tol: Option<f64>,
    /// Worker thread cap (also honors EXITSBM_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

impl CommonArgs {
    fn into_config(self) -> Result<RunConfig, Error> {
        let flags = RunConfig {
            model: self.model,
            n: self.n,
            a: self.a,
            b: self.b,
            mu: self.mu,
            k_frac: self.k_frac,
            lambda: self.lambda,
            p_over_q: self.p_over_q,
            p: self.p,
            q: self.q,
            k: self.k,
            alpha: self.alpha,
            epsilon: self.epsilon,
            iters: self.iters,
            seed: self.seed,
            out: self.out,
            grid: self.grid,
            tol: self.tol,
            threads: self.threads,
            ..Default::default()
        };
        Ok(match &self.config {
            Some(path) => flags.merged_over(RunConfig::from_json_file(path)?),
            None => flags,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labeled graph with side information and write its files.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run belief propagation; writes beliefs, estimates, and an error report
    /// with the DE prediction side by side.
    Bp {
        #[command(flatten)]
        common: CommonArgs,
        /// Read graph/labels/side-info from a previous `generate` run dir.
        #[arg(long)]
        load: Option<PathBuf>,
        /// Single-model estimator: `topk` (default) or `map`.
        #[arg(long)]
        estimator: Option<String>,
    },
    /// Density-evolution trace (t, state, predicted_error).
    De {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// EXIT transfer curve with crossings, operating point, and staircase.
    Exit {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Bisect a parameter for the phase-transition threshold.
    Scan {
        #[command(flatten)]
        common: CommonArgs,
        /// Which parameter to scan: lambda | mu | alpha | epsilon.
        #[arg(long = "scan-parameter")]
        scan_parameter: Option<String>,
        #[arg(long = "scan-lo")]
        scan_lo: Option<f64>,
        #[arg(long = "scan-hi")]
        scan_hi: Option<f64>,
    },
    /// Run the acceptance/property suite; exit code 0 iff all checks pass.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Run the sub-minute subset.
        #[arg(long)]
        quick: bool,
    },
}

fn run() -> Result<bool, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { common } => {
            let cfg = common.into_config()?;
            cli::configure_threads(&cfg);
            cli::cmd_generate(&cfg)?;
            Ok(true)
        }
        Command::Bp { common, load, estimator } => {
            let mut cfg = common.into_config()?;
            cfg.load = load.or(cfg.load);
            cfg.estimator = estimator.or(cfg.estimator);
            cli::configure_threads(&cfg);
            cli::cmd_bp(&cfg)?;
            Ok(true)
        }
        Command::De { common } => {
            let cfg = common.into_config()?;
            cli::configure_threads(&cfg);
            cli::cmd_de(&cfg)?;
            Ok(true)
        }
        Command::Exit { common } => {
            let cfg = common.into_config()?;
            cli::configure_threads(&cfg);
            cli::cmd_exit(&cfg)?;
            Ok(true)
        }
        Command::Scan { common, scan_parameter, scan_lo, scan_hi } => {
            let mut cfg = common.into_config()?;
            cfg.scan_parameter = scan_parameter.or(cfg.scan_parameter);
            cfg.scan_lo = scan_lo.or(cfg.scan_lo);
            cfg.scan_hi = scan_hi.or(cfg.scan_hi);
            cli::configure_threads(&cfg);
            cli::cmd_scan(&cfg)?;
            Ok(true)
        }
        Command::Validate { common, quick } => {
            let mut cfg = common.into_config()?;
            if quick {
                cfg.quick = Some(true);
            }
            cli::configure_threads(&cfg);
            let (_, report) = cli::cmd_validate(&cfg)?;
            Ok(report.all_passed)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_) | Error::Parse(_) | Error::Json(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
