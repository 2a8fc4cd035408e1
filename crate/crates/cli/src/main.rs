//! `selinf`: selective inference after LASSO selection, the covariance test,
//! and simulation campaigns.
//!
//! Exit codes: 0 success, 1 input or schema error, 2 empty selection,
//! 3 degenerate selection.

mod commands;
mod csvio;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use selinf::GlmFamily;

use commands::{CliError, Completed, LambdaSpec};

#[derive(Debug, Parser)]
#[command(name = "selinf", version, about = "Selective inference for affine selection procedures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the LASSO and report selective p-values and intervals for the active coefficients.
    Fit {
        /// Design CSV, n rows by p columns.
        #[arg(long)]
        design: PathBuf,
        /// Response CSV, a single column of n values.
        #[arg(long)]
        response: PathBuf,
        /// Penalty: a positive number or `four_sigma_sqrt_log_p`.
        #[arg(long)]
        lambda: LambdaSpec,
        /// Known noise standard deviation.
        #[arg(long)]
        sigma: f64,
        /// Intervals have level 1 - alpha.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Global-null covariance test at the first knot.
    Covtest {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        response: PathBuf,
        /// gaussian, bernoulli or poisson.
        #[arg(long, default_value = "gaussian")]
        family: GlmFamily,
        /// Known noise standard deviation; required for gaussian.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation campaign from a JSON config; writes report.json and pivots.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn emit(done: Completed, out: Option<PathBuf>) -> Result<u8, CliError> {
    match out {
        Some(path) => std::fs::write(&path, &done.json)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?,
        None => print!("{}", done.json),
    }
    Ok(done.exit_code)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Fit {
            design,
            response,
            lambda,
            sigma,
            alpha,
            out,
        } => emit(commands::fit(&design, &response, lambda, sigma, alpha)?, out),
        Command::Covtest {
            design,
            response,
            family,
            sigma,
            out,
        } => emit(commands::covtest(&design, &response, family, sigma)?, out),
        Command::Simulate {
            config,
            out,
            workers,
            seed,
        } => {
            let files = commands::simulate(&config, &out, workers, seed)?;
            println!(
                "{} usable pivots, KS {:.4}; wrote {} and {}",
                files.usable_pivots,
                files.ks_statistic,
                files.report.display(),
                files.pivots.display()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // clap's own usage-error status is 2, which is reserved for empty selections
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
