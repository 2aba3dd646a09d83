use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fvtau_cli::{order, output_dir, table, verify, CliError, ExperimentConfig, RunSummary};

#[derive(Parser)]
#[command(name = "fvtau", version, about = "Finite-volume fractional diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iteration counts, timings and errors per method.
    Table(Paths),
    /// Dense spectral bounds, GMRES envelope and symbol sector checks.
    Verify(Paths),
    /// Temporal and spatial convergence orders.
    Order(Paths),
}

#[derive(Args)]
struct Paths {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<RunSummary, CliError> {
    let (paths, runner): (&Paths, fn(&ExperimentConfig, &std::path::Path) -> Result<RunSummary, CliError>) =
        match &cli.command {
            Command::Table(p) => (p, table::run),
            Command::Verify(p) => (p, verify::run),
            Command::Order(p) => (p, order::run),
        };
    let cfg = ExperimentConfig::load(&paths.config)?;
    runner(&cfg, &output_dir(paths.out.as_deref(), &cfg))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(s) => {
            for f in &s.files {
                println!("wrote {}", f.display());
            }
            println!("{} rows, {} failed", s.rows, s.failed_rows);
            ExitCode::from(s.exit_code())
        }
        Err(e) => {
            eprintln!("fvtau: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
