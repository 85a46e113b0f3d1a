use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use nlburgers::config::{apply_env_overrides, parse_config, RunConfig};
use nlburgers::harness::{run, Subcommand};
use nlburgers::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// write the assembled stiffness matrix
    Assemble,
    /// eigenvalue table `k, lambda_k`
    Eigs,
    /// deterministic Galerkin trajectory
    RunDet,
    /// per-path stochastic trajectories and moments
    RunSde,
    /// Monte Carlo moments with the mean energy-balance check
    McMoments,
    /// per-path Besov time-regularity estimates
    Besov,
    /// weak-form residual along a deterministic run
    WeakResidual,
    /// self-convergence in the number of modes
    Convergence,
    /// full acceptance suite
    CheckAll,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Assemble => Subcommand::Assemble,
            Command::Eigs => Subcommand::Eigs,
            Command::RunDet => Subcommand::RunDet,
            Command::RunSde => Subcommand::RunSde,
            Command::McMoments => Subcommand::McMoments,
            Command::Besov => Subcommand::Besov,
            Command::WeakResidual => Subcommand::WeakResidual,
            Command::Convergence => Subcommand::Convergence,
            Command::CheckAll => Subcommand::CheckAll,
        }
    }
}

/// Nonlocal Burgers solver and verification suite.
///
/// Environment: NLBURGERS_SEED overrides the seed, NLBURGERS_THREADS the
/// worker count; both are recorded in the manifest.
#[derive(Debug, Parser)]
#[command(name = "nlburgers", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// `key = value` config file; defaults are used when omitted
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// overrides `output_dir` from the config
    #[arg(short, long)]
    output_dir: Option<String>,
}

fn execute(cli: Cli) -> Result<bool, Error> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.output_dir {
        cfg.output_dir = dir;
    }
    let env = apply_env_overrides(&mut cfg)?;
    if let Some(t) = env.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    }
    let outcome = run(cli.command.into(), &cfg, env, &mut |line| println!("{line}"))?;
    for f in &outcome.files {
        println!("wrote {}", PathBuf::from(&cfg.output_dir).join(f).display());
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
