//! SAS Transport (XPORT v5) reader.

mod document;
mod ibm;
mod tables;
pub mod writer;

pub use document::{parse_document, NamestrEntry, VarType, XptDocument, XptMember, XptValue, NAMESTR_LEN, RECORD};
pub use ibm::{ibm_to_ieee, ibm_to_ieee_truncated, ieee_to_ibm, is_missing_tag, IbmValue};
pub use tables::{to_variable_tables, XptImport};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum XptError {
    #[error("bad magic at byte {offset}: expected {expected}")]
    BadMagic { offset: usize, expected: &'static str },
    #[error("truncated record at byte {offset}")]
    TruncatedRecord { offset: usize },
    #[error("malformed namestr at byte {offset}: {reason}")]
    MalformedNamestr { offset: usize, reason: String },
    #[error("XPORT v8/v9 at byte {offset} is not supported")]
    UnsupportedVersion { offset: usize },
    #[error("id variable {0} not found")]
    MissingIdVariable(String),
    #[error("id variable {0} is not numeric")]
    NonNumericId(String),
    #[error("{0} has no IBM representation")]
    Unrepresentable(f64),
    #[error("value type does not match variable {0}")]
    TypeMismatch(String),
}
