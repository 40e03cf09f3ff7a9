use std::path::PathBuf;
use std::process::ExitCode;

use cavsim_cli::{run, CliError, Overrides, RunConfig};
use clap::Parser;

/// Semiclassical simulation of an atom cooled and trapped in a driven optical cavity.
#[derive(Debug, Parser)]
#[command(name = "cavsim", version)]
struct Args {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(short, long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cavsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.apply(&Overrides { seed: args.seed, workers: args.workers, output_dir: args.out.clone() });
    run(&cfg)
}
