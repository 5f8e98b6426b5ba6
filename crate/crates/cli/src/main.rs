use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hyptimes_cli::{run, Experiment, ExperimentConfig};

/// Exit status for configuration and runtime errors; check failures use
/// their count, capped below this.
const ERROR_STATUS: u8 = 255;

#[derive(Parser)]
#[command(name = "hyptimes", version, about = "Hyperbolic-time experiments on circle maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments listed in a config file.
    Run { config: PathBuf },
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
    /// List the available experiment names.
    ListExperiments,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => {
            let outcome = ExperimentConfig::load(&config).and_then(|cfg| {
                let outcome = run(&cfg)?;
                Ok((cfg, outcome))
            });
            match outcome {
                Ok((cfg, outcome)) => {
                    for o in &outcome.outputs {
                        println!("{}: wrote {} files", o.experiment.name(), o.artifacts.len());
                    }
                    for c in outcome.checks() {
                        println!("{}", c.summary_line());
                    }
                    let failures = outcome.failures();
                    println!("output: {}; {failures} failed checks", cfg.output_dir.display());
                    ExitCode::from(failures.min(ERROR_STATUS as usize - 1) as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(ERROR_STATUS)
                }
            }
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                let names: Vec<&str> = cfg.experiments.iter().map(|e| e.name()).collect();
                println!("ok: map {}, experiments [{}]", cfg.map.name(), names.join(", "));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(ERROR_STATUS)
            }
        },
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<10} {}", e.name(), e.describe());
            }
            ExitCode::SUCCESS
        }
    }
}
