//! Experiment runner for the `hyptimes` binary.

pub mod checks;
pub mod config;
mod error;
pub mod experiments;
pub mod output;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};
pub use experiments::ExperimentOutput;

/// Everything a run produced, in experiment order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub outputs: Vec<ExperimentOutput>,
}

impl RunOutcome {
    pub fn checks(&self) -> impl Iterator<Item = &checks::CheckOutcome> {
        self.outputs.iter().flat_map(|o| o.checks.iter())
    }

    pub fn failures(&self) -> usize {
        self.checks().filter(|c| !c.passed).count()
    }
}

/// Runs the configured experiments in order, writing each one's artifacts
/// to the output directory as soon as it finishes.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    output::prepare_dir(&cfg.output_dir)?;
    let mut outputs: Vec<ExperimentOutput> = Vec::new();
    for &e in &cfg.experiments {
        let out = experiments::run_experiment(cfg, e, &outputs)?;
        output::write_all(&cfg.output_dir, &out.artifacts)?;
        outputs.push(out);
    }
    Ok(RunOutcome { outputs })
}
