//! The acquisition process over feature masks: catalogs, partial states, the
//! query operator, cost accounting and termination rules.

mod catalog;
mod cost;
mod rule;
mod state;
mod trajectory;

pub use catalog::{Category, FeatureCatalog, FeatureKind, FeatureMeta};
pub use cost::{Cost, CostParseError};
pub use rule::TerminationRule;
pub use state::AcquisitionState;
pub use trajectory::{read_trajectory_csv, replay_costs, write_trajectory_csv, TrajectoryRecord};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AcquisitionError {
    #[error("feature {0} is already acquired")]
    AlreadyAcquired(usize),
    #[error("feature index {index} out of range for {len} features")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value for feature {0}")]
    NonFiniteValue(usize),
    #[error("acquisition cost overflow")]
    CostOverflow,
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("invalid termination rule: {0}")]
    InvalidRule(String),
    #[error("invalid trajectory log: {0}")]
    InvalidLog(String),
    #[error("state invariant violated: {0}")]
    InvariantViolated(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for AcquisitionError {
    fn from(e: csv::Error) -> Self {
        AcquisitionError::Csv(e.to_string())
    }
}

impl From<std::io::Error> for AcquisitionError {
    fn from(e: std::io::Error) -> Self {
        AcquisitionError::Csv(e.to_string())
    }
}
