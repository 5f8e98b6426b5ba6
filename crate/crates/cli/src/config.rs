//! Experiment configuration, loaded from TOML.
//!
//! Only `map`, `seed`, `horizon`, `experiments`, `[params]` and `[ensemble]`
//! are required; every other section falls back to the acceptance-scale
//! defaults below. See `configs/default.toml` for the committed values.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hyptimes_core::orbits::SamplingKind;
use hyptimes_core::{EnsembleSpec, HyperbolicParams, MapKind};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "HYPTIMES_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Detect,
    Firsttime,
    Ulam,
    Verify,
    Report,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::Detect, Experiment::Firsttime, Experiment::Ulam, Experiment::Verify, Experiment::Report];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Detect => "detect",
            Experiment::Firsttime => "firsttime",
            Experiment::Ulam => "ulam",
            Experiment::Verify => "verify",
            Experiment::Report => "report",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Experiment::Detect => "per-point hyperbolic times and frequencies",
            Experiment::Firsttime => "first-hyperbolic-time distribution and tail diagnostics",
            Experiment::Ulam => "exact-branch Ulam invariant density",
            Experiment::Verify => "integrals, recurrence sequence, local checks and recurrence profiles",
            Experiment::Report => "pass/fail summary for every acceptance criterion",
        }
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub sigma: f64,
    pub delta: f64,
    pub b: f64,
    pub beta: f64,
    #[serde(default)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub kind: SamplingKind,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UlamConfig {
    pub k: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for UlamConfig {
    fn default() -> Self {
        Self { k: 4096, tol: 1e-10, max_iters: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    /// Horizons at which ℓ(n)/n is reported; the top-level horizon is added.
    /// Defaults to horizon/100 and horizon/10.
    pub horizons: Option<Vec<usize>>,
    /// Frequency threshold θ.
    pub theta: f64,
    /// Length of the example trace written for the first point.
    pub trace_length: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { horizons: None, theta: 0.4, trace_length: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub lyapunov_points: usize,
    pub lyapunov_horizon: usize,
    pub lemma51_n: usize,
    pub transfer_points: usize,
    pub local_orbits: usize,
    pub local_length: usize,
    pub local_pairs: usize,
    pub recurrence_points: usize,
    pub recurrence_horizon: usize,
    pub recurrence_delta0: f64,
    pub recurrence_levels: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            lyapunov_points: 1000,
            lyapunov_horizon: 10_000,
            lemma51_n: 1_000_000,
            transfer_points: 10_000,
            local_orbits: 20,
            local_length: 1000,
            local_pairs: 10,
            recurrence_points: 1000,
            recurrence_horizon: 100_000,
            recurrence_delta0: 0.1,
            recurrence_levels: 8,
        }
    }
}

/// Sizes used by the acceptance checks; defaults are the acceptance scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub oracle_cases: usize,
    pub oracle_random_traces: usize,
    pub oracle_random_length: usize,
    pub transfer_points: usize,
    pub ulam_k: usize,
    pub lyapunov_points: usize,
    pub lyapunov_horizon: usize,
    pub lemma51_n: usize,
    pub firsttime_points: usize,
    pub firsttime_horizon: usize,
    pub frequency_points: usize,
    pub frequency_horizon: usize,
    pub local_times: Vec<usize>,
    pub local_orbits: usize,
    pub local_pairs: usize,
    pub distortion_pin: f64,
    pub density_times: Vec<usize>,
    pub density_points: usize,
    pub density_k: usize,
    pub density_spread: f64,
    /// Re-render every artifact of the run and compare bytes.
    pub check_reproducibility: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            oracle_cases: 100_000,
            oracle_random_traces: 1000,
            oracle_random_length: 200,
            transfer_points: 10_000,
            ulam_k: 4096,
            lyapunov_points: 10_000,
            lyapunov_horizon: 100_000,
            lemma51_n: 1_000_000,
            firsttime_points: 10_000,
            firsttime_horizon: 100_000,
            frequency_points: 1000,
            frequency_horizon: 100_000,
            local_times: vec![10, 100, 1000],
            local_orbits: 100,
            local_pairs: 10,
            distortion_pin: 1.1,
            density_times: vec![10, 100, 1000],
            density_points: 100_000,
            density_k: 128,
            density_spread: 2.0,
            check_reproducibility: true,
        }
    }
}

/// Raw file contents; [`ExperimentConfig::from_str`] validates them.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    map: String,
    seed: u64,
    horizon: usize,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    experiments: Vec<String>,
    params: ParamsConfig,
    ensemble: EnsembleConfig,
    #[serde(default)]
    ulam: UlamConfig,
    #[serde(default)]
    detect: DetectConfig,
    #[serde(default)]
    verify: VerifyConfig,
    #[serde(default)]
    report: ReportConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub map: MapKind,
    pub seed: u64,
    pub horizon: usize,
    pub output_dir: PathBuf,
    pub experiments: Vec<Experiment>,
    pub params: HyperbolicParams,
    pub ensemble: EnsembleConfig,
    pub ulam: UlamConfig,
    pub detect: DetectConfig,
    pub verify: VerifyConfig,
    pub report: ReportConfig,
}

impl FromStr for ExperimentConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let map = MapKind::from_str(&raw.map).map_err(|e| CliError::Config(e.to_string()))?;
        let p = raw.params;
        let params = HyperbolicParams::new(p.sigma, p.delta, p.b, p.beta)
            .and_then(|hp| hp.with_tolerance(p.tolerance))
            .map_err(|e| CliError::Config(e.to_string()))?;
        let experiments = raw
            .experiments
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Experiment>>>()?;
        if raw.horizon == 0 || raw.ensemble.size == 0 {
            return Err(CliError::Config("horizon and ensemble size must be positive".into()));
        }
        if !(raw.detect.theta > 0.0 && raw.detect.theta <= 1.0) {
            return Err(CliError::Config(format!("theta = {} must lie in (0, 1]", raw.detect.theta)));
        }
        if let Some(&n) = raw.detect.horizons.iter().flatten().find(|&&n| n == 0 || n > raw.horizon) {
            return Err(CliError::Config(format!("detect horizon {n} must lie in 1..={}", raw.horizon)));
        }
        Ok(Self {
            map,
            seed: raw.seed,
            horizon: raw.horizon,
            output_dir: raw.output_dir,
            experiments,
            params,
            ensemble: raw.ensemble,
            ulam: raw.ulam,
            detect: raw.detect,
            verify: raw.verify,
            report: raw.report,
        })
    }
}

impl ExperimentConfig {
    /// Reads and validates a config file. Relative output directories are
    /// resolved against the current directory; [`OUTPUT_DIR_ENV`] overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: Self = text.parse()?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    /// The main ensemble, seeded from the config seed.
    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec { kind: self.ensemble.kind, size: self.ensemble.size, seed: self.seed }
    }

    /// Independent seed for the named purpose, derived from the config seed.
    pub fn derived_seed(&self, stream: u64) -> u64 {
        derive_seed(self.seed, stream)
    }

    /// Detect horizons including the top-level horizon, ascending.
    pub fn detect_horizons(&self) -> Vec<usize> {
        let mut h = match &self.detect.horizons {
            Some(h) => h.clone(),
            None => [self.horizon / 100, self.horizon / 10].into_iter().filter(|&n| n > 0).collect(),
        };
        h.push(self.horizon);
        h.sort_unstable();
        h.dedup();
        h
    }
}

/// First output of the ChaCha8 stream `stream` under `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}
