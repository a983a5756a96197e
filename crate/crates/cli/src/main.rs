mod commands;
mod context;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use context::{Failure, Overrides};

#[derive(Parser)]
#[command(name = "tpdo", version, about = "Toroidal pseudodifferential calculus workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides `threads` in the config.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Discrete Taylor remainders against their bounds over randomized cases.
    Taylor(RunArgs),
    /// Extend a toroidal symbol to real frequencies.
    Extend(RunArgs),
    /// Schur bound against the power-iteration operator norm.
    #[command(name = "l2bound")]
    L2Bound(RunArgs),
    /// Fourier series operator compositions, direct against asymptotic.
    Compose(RunArgs),
    /// Periodisation checks: spectra, commutation, smoothing residual.
    Periodise(RunArgs),
    /// Periodised hyperbolic evolution.
    Solve(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args, run): (&str, RunArgs, commands::Runner) = match cli.command {
        Command::Taylor(a) => ("taylor", a, commands::taylor::run),
        Command::Extend(a) => ("extend", a, commands::extend::run),
        Command::L2Bound(a) => ("l2bound", a, commands::l2bound::run),
        Command::Compose(a) => ("compose", a, commands::compose::run),
        Command::Periodise(a) => ("periodise", a, commands::periodise::run),
        Command::Solve(a) => ("solve", a, commands::solve::run),
    };
    let overrides = Overrides { command: name, config: args.config, output: args.output, seed: args.seed, threads: args.threads };
    match run(&overrides) {
        Ok(verdict) => {
            println!("{name}: {} ({})", if verdict.pass { "pass" } else { "FAIL" }, verdict.summary);
            if verdict.pass {
                ExitCode::SUCCESS
            } else {
                for line in &verdict.diagnostics {
                    eprintln!("{line}");
                }
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("tpdo {name}: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("tpdo {name}: {msg}");
            ExitCode::from(1)
        }
    }
}
