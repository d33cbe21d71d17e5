use serde::{Deserialize, Serialize};

use super::DataError;

const MIN_STD: f64 = 1e-12;

/// Training-split statistics of a real column, in original units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl NormStats {
    pub fn fit(column: &[Option<f64>]) -> Result<Self, DataError> {
        let present: Vec<f64> = column.iter().flatten().copied().collect();
        if present.is_empty() {
            return Err(DataError::DegenerateColumn("no available entries".into()));
        }
        let n = present.len() as f64;
        let mean = present.iter().sum::<f64>() / n;
        let var = present.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std < MIN_STD {
            return Err(DataError::DegenerateColumn(format!("zero variance (std {std:e})")));
        }
        Ok(NormStats { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

/// Standardizes available entries; missing entries become 0.
pub fn normalize(column: &[Option<f64>], stats: &NormStats) -> Vec<f64> {
    column.iter().map(|v| v.map_or(0.0, |v| stats.apply(v))).collect()
}

/// Sorted set of training-split codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub codes: Vec<String>,
}

impl Vocabulary {
    pub fn fit<'a>(codes: impl IntoIterator<Item = Option<&'a str>>) -> Result<Self, DataError> {
        let mut set: Vec<String> = codes.into_iter().flatten().map(str::to_string).collect();
        set.sort();
        set.dedup();
        if set.is_empty() {
            return Err(DataError::EmptyVocabulary);
        }
        Ok(Vocabulary { codes: set })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn index(&self, code: &str) -> Option<usize> {
        self.codes.binary_search_by(|c| c.as_str().cmp(code)).ok()
    }
}

/// Result of one-hot encoding a column.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHot {
    /// `rows × vocabulary` indicator matrix, row-major.
    pub rows: Vec<Vec<f64>>,
    /// Available entries whose code was not in the vocabulary.
    pub unseen: usize,
}

pub fn one_hot(column: &[Option<&str>], vocab: &Vocabulary) -> Result<OneHot, DataError> {
    if vocab.is_empty() {
        return Err(DataError::EmptyVocabulary);
    }
    let mut unseen = 0;
    let rows = column
        .iter()
        .map(|code| {
            let mut row = vec![0.0; vocab.len()];
            if let Some(code) = code {
                match vocab.index(code) {
                    Some(i) => row[i] = 1.0,
                    None => unseen += 1,
                }
            }
            row
        })
        .collect();
    Ok(OneHot { rows, unseen })
}
