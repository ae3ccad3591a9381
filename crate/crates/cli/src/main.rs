//! `diffid certify|forward|invert|mms --config <path> [--force]`
//!
//! Exit codes: 0 success, 1 usage or data error, 2 certificate failure,
//! 3 non-convergence.

mod commands;
mod config;
mod fields;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "diffid", version, about = "Recover a(t,x) in u_t - Δu - u_yy + a u = f from ∫u ω dy = ψ")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Invert even when the certificate fails.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the solvability hypotheses and write certificate.json.
    Certify(RunArgs),
    /// Solve the direct problem with a known potential.
    Forward(RunArgs),
    /// Recover the potential.
    Invert(RunArgs),
    /// Manufactured-solution convergence, uniqueness and strong-norm tables.
    Mms(RunArgs),
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("DIFFID_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("DIFFID_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        anyhow::bail!("DIFFID_THREADS must be a positive integer, got 0");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<commands::Outcome> {
    init_threads()?;
    let load = |a: &RunArgs| config::Config::load(&a.config);
    match &cli.command {
        Command::Certify(a) => commands::certify(&load(a)?),
        Command::Forward(a) => commands::forward(&load(a)?),
        Command::Invert(a) => commands::invert(&load(a)?, a.force),
        Command::Mms(a) => commands::mms(&load(a)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(o) => ExitCode::from(o.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
