//! Plug-in mutual information between a feature and the class label.

use std::collections::BTreeMap;

use super::DataError;
use crate::binning::{assign_bin, equal_frequency_edges};

pub const DEFAULT_MI_BINS: usize = 16;

/// A feature column as seen by the MI estimator.
#[derive(Debug, Clone, Copy)]
pub enum FeatureColumn<'a> {
    /// Binned into equal-frequency bins.
    Real(&'a [Option<f64>]),
    /// Codes are used directly as bins.
    Coded(&'a [Option<&'a str>]),
}

impl FeatureColumn<'_> {
    fn len(&self) -> usize {
        match self {
            FeatureColumn::Real(v) => v.len(),
            FeatureColumn::Coded(v) => v.len(),
        }
    }
}

/// `I(X; Y)` in nats over rows where the feature is available.
pub fn mutual_information(
    feature: FeatureColumn<'_>,
    labels: &[usize],
    bins: usize,
) -> Result<f64, DataError> {
    if feature.len() != labels.len() {
        return Err(DataError::InsufficientData(format!(
            "{} feature rows but {} labels",
            feature.len(),
            labels.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = match feature {
        FeatureColumn::Real(values) => {
            let present: Vec<f64> = values.iter().flatten().copied().collect();
            let edges = equal_frequency_edges(&present, bins);
            values
                .iter()
                .zip(labels)
                .filter_map(|(v, &y)| v.map(|v| (assign_bin(&edges, v), y)))
                .collect()
        }
        FeatureColumn::Coded(codes) => {
            let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
            for c in codes.iter().flatten() {
                let next = ids.len();
                ids.entry(c).or_insert(next);
            }
            codes
                .iter()
                .zip(labels)
                .filter_map(|(c, &y)| c.map(|c| (ids[c], y)))
                .collect()
        }
    };
    let mut label_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &(_, y) in &pairs {
        *label_counts.entry(y).or_default() += 1;
    }
    if label_counts.len() < 2 {
        return Err(DataError::InsufficientData(
            "fewer than two label values among available rows".into(),
        ));
    }
    let n = pairs.len() as f64;
    let mut x_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(x, y) in &pairs {
        *x_counts.entry(x).or_default() += 1;
        *joint.entry((x, y)).or_default() += 1;
    }
    let mut mi = 0.0;
    for (&(x, y), &c) in &joint {
        let pxy = c as f64 / n;
        let px = x_counts[&x] as f64 / n;
        let py = label_counts[&y] as f64 / n;
        mi += pxy * (pxy / (px * py)).ln();
    }
    Ok(mi.max(0.0))
}

/// Plug-in entropy in nats of a count table.
pub fn entropy_of_counts(counts: impl IntoIterator<Item = usize>) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}
