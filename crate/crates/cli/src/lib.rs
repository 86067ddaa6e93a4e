//! Experiment runner behind the `seqtherm` binary.
//!
//! A run takes an [`ExperimentConfig`], dispatches it to the named
//! [`Scenario`](scenarios::Scenario) and writes one CSV per result table.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod presets;
pub mod scenarios;
pub mod table;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use scenarios::ScenarioRegistry;
pub use table::ResultTable;

/// Runs `cfg` and writes its tables into `dir`, returning the file paths.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = ScenarioRegistry::with_builtin().run(cfg)?;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    tables.iter().map(|t| t.write(dir, cfg)).collect()
}

/// Worker count from `SEQTHERM_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("SEQTHERM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "SEQTHERM_THREADS must be a positive integer, got '{v}'"
            ))),
        },
        Err(_) => Ok(None),
    }
}
