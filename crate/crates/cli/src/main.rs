#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::CliError;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "sublevy", version, about = "Sublinear semigroups of jump processes under parameter uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set pide.nx=401`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Monte Carlo seed (overrides `mc.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve the PIDE and write u.csv and meta.txt.
    Solve,
    /// Monte Carlo under the PIDE argmax policy; writes mc.csv.
    Simulate,
    /// Audit the model conditions; writes audit.txt.
    Validate,
    /// Compare a degenerate model against Fourier inversion; writes fourier.csv.
    FourierCheck,
    /// Tabulate the kernel transform; writes k.csv.
    Transform,
    /// Compare solve(T) with a restart from T/2; writes dpp.csv.
    DppCheck,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    for o in &cli.overrides {
        cfg.apply_override(o).map_err(|e| CliError::Config(format!("--set: {e}")))?;
    }
    if let Some(out) = &cli.out {
        cfg.directory = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| CliError::Config(e.0))?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Validate => commands::validate(&cfg),
        Command::FourierCheck => commands::fourier_check(&cfg),
        Command::Transform => commands::transform(&cfg),
        Command::DppCheck => commands::dpp_check(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}: {e}", e.code());
            ExitCode::from(e.exit_status())
        }
    }
}
