use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Spectral and nonlinear stability experiments for ODE blow-up profiles.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// profile-check, mode-stability, equivalence, linear-decay, nonlinear-trap, shoot or trichotomy
    experiment: String,

    /// Flat `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides as `--key value`; these win over the file
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = blowlab::cli::main_with(&cli.experiment, cli.config.as_deref(), &cli.overrides);
    ExitCode::from(code as u8)
}
