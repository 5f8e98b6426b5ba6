use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown experiment {0:?}; run `hyptimes list-experiments`")]
    UnknownExperiment(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("experiment {experiment}: {source}")]
    Experiment {
        experiment: &'static str,
        #[source]
        source: hyptimes_core::Error,
    },
}
