use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fsi_fem::Exec;
use fsi_fem_cli::{execute, parse_config, Mode};

/// Finite element runs and convergence studies for Stokes-wave interaction.
#[derive(Debug, Parser)]
#[command(name = "fsi-fem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One simulation with per-step errors and energy.
    Run(Common),
    /// Spatial or temporal convergence sweep (`convergence_space` / `convergence_time`).
    Convergence(Common),
    /// Dynamic Ritz projection rates over a mesh list.
    Ritz(Common),
    /// Strong-form residual check of the manufactured sources.
    VerifySources(Common),
    /// Differences against a fine reference mesh.
    SelfConvergence(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampling seed for source verification (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
}

fn accepts(command: &Command, mode: Mode) -> bool {
    matches!(
        (command, mode),
        (Command::Run(_), Mode::Run)
            | (Command::Convergence(_), Mode::ConvergenceSpace | Mode::ConvergenceTime)
            | (Command::Ritz(_), Mode::Ritz)
            | (Command::VerifySources(_), Mode::VerifySources)
            | (Command::SelfConvergence(_), Mode::SelfConvergence)
    )
}

fn run(cli: Cli) -> Result<bool> {
    let common = match &cli.command {
        Command::Run(c) | Command::Convergence(c) | Command::Ritz(c) | Command::VerifySources(c) | Command::SelfConvergence(c) => c,
    };
    let mut cfg = parse_config(&common.config)?;
    if !accepts(&cli.command, cfg.mode) {
        bail!("config mode {} does not belong to this subcommand", cfg.mode.name());
    }
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    let out = common.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let exec = match common.jobs {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(1) => Exec::Sequential,
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
            Exec::Parallel
        }
        None => Exec::default(),
    };
    log::info!("mode {} -> {}", cfg.mode.name(), out.display());
    let outcome = execute(&cfg, &out, exec)?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    println!("{}", if outcome.pass { "PASS" } else { "FAIL" });
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FSI_FEM_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
