use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use zaremba::cli::{configure_threads, execute, parse_config, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "zaremba",
    version,
    about = "Mixed boundary Helmholtz solver and boundary-partition optimizer"
)]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Scan sigma_min over a wavenumber range and list characteristic values
    EigScan(Common),
    /// Sample the Zaremba function on a grid
    FieldGrid(Common),
    /// Evaluate the Zaremba function at receiver points
    ZarembaEval(Common),
    /// Optimize the Neumann partition for a source/receiver pair
    Optimize(Common),
    /// Run the property suite
    Validate(Common),
}

fn load(command: Command, common: &Common) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            parse_config(&text, Some(command))?
        }
        None => parse_config("", Some(command))?,
    };
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    configure_threads();
    let (command, common) = match &args.command {
        Sub::EigScan(c) => (Command::EigScan, c),
        Sub::FieldGrid(c) => (Command::FieldGrid, c),
        Sub::ZarembaEval(c) => (Command::ZarembaEval, c),
        Sub::Optimize(c) => (Command::Optimize, c),
        Sub::Validate(c) => (Command::Validate, c),
    };
    match load(command, common).and_then(|c| execute(&c)) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
