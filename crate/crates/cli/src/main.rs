//! `ustat`: command-line front end for mixing-ustat.
//!
//! Every command reads one strict JSON config, writes its outputs into the
//! `--out` directory together with the resolved config, and exits with
//! 0 (success), 2 (configuration error), 3 (acceptance failure) or
//! 4 (enumeration budget exceeded).

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ustat", version, about = "U- and V-statistics of beta-mixing sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// JSON config file.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
    /// Replace the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker thread limit for parallel sections.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// More log output on standard error (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate β-mixing coefficients of a process.
    Beta(Common),
    /// Draw sample paths.
    Simulate(Common),
    /// Evaluate a U- or V-statistic on one path.
    Stat(Common),
    /// Compare exact neighbourhood sizes of the characterizing graph with their bounds.
    GraphAudit(Common),
    /// Evaluate the asymptotic-normality conditions on a grid.
    Conditions(Common),
    /// Monte Carlo check of moment and distribution convergence.
    VerifyClt {
        #[command(flatten)]
        common: Common,
        /// Print the resolved plan and exit without simulating.
        #[arg(long)]
        dry_run: bool,
    },
    /// Exact mean and variance by path enumeration.
    Oracle(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Beta(c)
        | Command::Simulate(c)
        | Command::Stat(c)
        | Command::GraphAudit(c)
        | Command::Conditions(c)
        | Command::Oracle(c) => c,
        Command::VerifyClt { common, .. } => common,
    };
    let level = match common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let outcome = match &cli.command {
        Command::Beta(c) => commands::beta(c),
        Command::Simulate(c) => commands::simulate(c),
        Command::Stat(c) => commands::stat(c),
        Command::GraphAudit(c) => commands::graph_audit(c),
        Command::Conditions(c) => commands::conditions(c),
        Command::VerifyClt { common, dry_run } => commands::verify_clt(common, *dry_run),
        Command::Oracle(c) => commands::oracle(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ustat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
