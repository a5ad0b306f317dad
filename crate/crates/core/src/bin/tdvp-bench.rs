use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use heisenberg_tdvp::bench::{self, ConfigPatch};

/// Standard vs. augmented TDVP for the spin-1 XXZ chain, checked against
/// exact diagonalization.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Key-value file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: ConfigPatch,
}

/// Returns the number of failed runs.
fn run(args: Args) -> heisenberg_tdvp::Result<usize> {
    let base = match &args.config {
        Some(path) => ConfigPatch::from_file(path)?,
        None => ConfigPatch::default(),
    };
    let cfg = base.merge(args.overrides).resolve()?;
    let experiment = bench::run_experiment(&cfg)?;
    print!("{}", std::fs::read_to_string(cfg.output_dir.join(bench::SUMMARY_TXT))?);
    Ok(experiment.failures.len())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} runs failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
