//! Raw variable tables to task datasets.

mod bundle;
mod labels;
mod mi;
mod preprocess;
mod select;
pub mod synthetic;
mod table;
mod task;

pub use bundle::{load_bundle, write_bundle, BundleManifest};
pub use labels::{label_diabetes, label_heart_disease, label_hypertension, DIABETES_CLASSES};
pub use mi::{entropy_of_counts, mutual_information, FeatureColumn, DEFAULT_MI_BINS};
pub use preprocess::{normalize, one_hot, NormStats, OneHot, Vocabulary};
pub use select::{auto_select, infer_kind, score_variable, table_kind, SelectedVariable};
pub use table::{read_variable_dir, write_variable_dir, RawValue, VariableIndexEntry, VariableTable};
pub use task::{
    build_task, guess_category, stratified_split, FeatureRecipe, PrepConfig, Splits, TargetSpec, TaskDataset,
    TaskDefinition,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("io: {0}")]
    Io(String),
    #[error("degenerate column: {0}")]
    DegenerateColumn(String),
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no features passed selection")]
    NoFeaturesSelected,
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("no heart-disease indicators configured")]
    NoIndicatorsConfigured,
    #[error("no subjects left after joining tables and computing labels")]
    EmptyJoin,
    #[error("missing variable {0}")]
    MissingVariable(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error(transparent)]
    Cost(#[from] crate::costs::CostError),
    #[error(transparent)]
    Acquisition(#[from] crate::acquisition::AcquisitionError),
}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e.to_string())
    }
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        DataError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for DataError {
    fn from(e: serde_json::Error) -> Self {
        DataError::InvalidBundle(e.to_string())
    }
}
