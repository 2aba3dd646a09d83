//! Experiment runner behind the `fvtau` binary: iteration tables, bound
//! verification and convergence-order studies driven by a TOML file.

use std::path::{Path, PathBuf};

pub mod config;
pub mod order;
pub mod output;
pub mod table;
pub mod verify;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// What a command wrote and whether every row succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub rows: usize,
    pub failed_rows: usize,
}

impl RunSummary {
    pub fn exit_code(&self) -> u8 {
        u8::from(self.failed_rows > 0)
    }
}

/// `--out` wins over `output_dir`, which wins over `./results`.
pub fn output_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"))
}
