//! Manifest-driven experiment runner for `beyondq`.
//!
//! A manifest is a TOML file naming an experiment kind, a master seed, an
//! optional output directory and a `params` table:
//!
//! ```toml
//! kind = "gambler"
//! seed = 7
//! output = "out/gambler"
//!
//! [params]
//! x0 = 0.5
//! stake = 0.01
//! runs = 10000
//! ```
//!
//! Physical quantities carry units (`"1e-5 cm"`, `"0.1 nat"`, `"30 deg"`);
//! bare numbers are accepted only for dimensionless parameters.

pub mod catalog;
pub mod experiments;
pub mod manifest;
pub mod record;
pub mod units;

use thiserror::Error;

pub use catalog::{list_experiments, CatalogEntry, Kind};
pub use experiments::{Experiment, Output, Table};
pub use manifest::{RunManifest, SchemaError};
pub use record::{run_manifest, OutputFile, RunOptions, RunRecord};

/// Version of the `summary.json` and `record.json` layouts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Io(String),
    #[error("invalid manifest:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Schema(Vec<SchemaError>),
    #[error("numerical failure in {0}")]
    Numerical(String),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Io(_) => 1,
            BenchError::Schema(_) => 2,
            BenchError::Numerical(_) => 3,
        }
    }
}

/// Parses and schema-checks a manifest without running it.
pub fn validate(path: &std::path::Path) -> Result<RunManifest, BenchError> {
    let manifest = RunManifest::load(path)?;
    Experiment::from_manifest(&manifest).map_err(BenchError::Schema)?;
    Ok(manifest)
}
