//! Accuracy-versus-cost sweeps, acquisition-order matrices, logistic feature
//! importance and result export.

mod export;
mod importance;
mod layout;
mod order;
mod sweep;

pub use export::{
    curve_svg, export, fmt_f64, read_sweep_csv, read_sweep_json, sweep_csv_string, write_sweep_csv, ExportFormat,
};
pub use importance::{importance_csv_string, logistic_importance, FeatureImportance, ImportanceConfig};
pub use layout::{file_sha256, run_dir, write_manifest, RunManifest, MANIFEST_FILE};
pub use order::{order_matrix, OrderMatrix};
pub use sweep::{sweep, Control, SweepOutput, SweepPoint, SweepResult, SweepTemplate};

use thiserror::Error;

use crate::strategies::StrategyError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("strategy has not been trained")]
    UntrainedStrategy,
    #[error("no results to export")]
    EmptyResults,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed results: {0}")]
    Malformed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("logistic training diverged: {0}")]
    TrainingDiverged(String),
}

impl From<csv::Error> for EvalError {
    fn from(e: csv::Error) -> Self {
        EvalError::Malformed(e.to_string())
    }
}

impl From<serde_json::Error> for EvalError {
    fn from(e: serde_json::Error) -> Self {
        EvalError::Malformed(e.to_string())
    }
}
