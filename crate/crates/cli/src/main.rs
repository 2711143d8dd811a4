use std::path::PathBuf;
use std::process::ExitCode;

use biased_spline_cli::{run, Command, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biased-spline", version, about = "Solve and tabulate biased spline problems")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Progress messages on stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Solve the configured boundary-value problem.
    Solve,
    /// Tabulate geometric tensors on the configured grid.
    Tensors,
    /// Sample unit-ball boundaries on the configured grid.
    Indicatrix,
    /// Run shooting and collocation and compare them.
    Compare,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::Solve => Command::Solve,
        Sub::Tensors => Command::Tensors,
        Sub::Indicatrix => Command::Indicatrix,
        Sub::Compare => Command::Compare,
    };
    let Some(path) = cli.config else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(1);
    };
    let result = RunConfig::load(&path).and_then(|config| run(command, &config, &cli.out, cli.verbose));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
