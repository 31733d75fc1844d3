use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use charflow::{parse_config, run, Overrides};

/// Characteristic-flow toolkit for first-order PDEs on jet space.
#[derive(Parser)]
#[command(name = "charflow", version, about)]
struct Cli {
    /// Path to a TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output prefix; overrides `out` from the config.
    #[arg(long)]
    out: Option<String>,
    /// RNG seed; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplier applied to every tolerance in the run.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        tol_scale: cli.tol_scale,
    };
    match run(&cfg, &overrides) {
        Ok(summary) => {
            print!("{}", summary.report);
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
