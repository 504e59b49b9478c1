//! The distributed sparse-recovery benchmark: instance generation,
//! configuration, persistence and the experiment driver.

mod config;
mod experiment;
mod instance;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ExperimentConfig, LARGE_INSTANCE_ENTRIES, RNG_NAME};
pub use experiment::{
    generate, read_manifest, run_experiment, run_variant, solver_config, sweep, with_param, write_records_csv, Manifest,
    VariantRun, VariantSummary, GRAPH_FILE, INSTANCE_FILE, MANIFEST_FILE, SWEEP_PARAMS,
};
pub use instance::{generate_graph, generate_instance, Instance, INSTANCE_STREAM, MAGIC};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed instance file: {0}")]
    Format(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Dc(#[from] crate::dc::DcError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
}
