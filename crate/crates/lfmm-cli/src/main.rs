//! `lfmm` — config-driven experiments on ridge ERM classification of
//! linear factor mixtures: theory solves, Monte Carlo sweeps, score
//! histograms, and universality audits.
//!
//! Every command is deterministic given its config and flags; re-running
//! rewrites byte-identical outputs except the timestamp in the
//! `run_meta.json` sidecar. Exit code 0 means every requested computation
//! converged and the model passed validation; any failure prints a
//! machine-readable JSON error to stderr.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lfmm", version, about = "Ridge ERM on linear factor mixtures: theory vs simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out_dir`; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker pool size for trials and sweep points (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the experiment seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the order-parameter system across the lambda sweep.
    Solve(CommonOpts),
    /// Solve and run Monte Carlo trials; write the joined comparison table.
    Simulate(CommonOpts),
    /// Train one classifier and write empirical vs theoretical score distributions.
    Histogram(CommonOpts),
    /// Audit Gaussian universality against the equivalent GMM, with an empirical cross-test.
    Universality(CommonOpts),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, opts) = match &cli.command {
        Command::Solve(o) => ("solve", o),
        Command::Simulate(o) => ("simulate", o),
        Command::Histogram(o) => ("histogram", o),
        Command::Universality(o) => ("universality", o),
    };
    match commands::run(name, opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", commands::error_json(&err));
            ExitCode::FAILURE
        }
    }
}
