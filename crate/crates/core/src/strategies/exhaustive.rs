//! Expected-sensitivity acquisition by enumerating the candidate values of
//! each missing feature.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{pick_best, Predictor, StrategyError};
use crate::acquisition::{AcquisitionState, FeatureCatalog};
use crate::binning::{assign_bin, equal_frequency_edges};
use crate::data::TaskDataset;

/// Candidate values of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    /// One encoded value per bin (bin mean for real features, the unit
    /// vector for one-hot features).
    pub centers: Vec<Vec<f64>>,
    /// Bin of each stored row; `None` where the feature was not observed.
    pub row_bin: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveModel {
    pub predictor: Predictor,
    pub bins: usize,
    pub neighbors: usize,
    /// Reference rows (encoded) and their per-feature availability.
    pub store: Array2<f64>,
    pub store_observed: Array2<f64>,
    pub features: Vec<FeatureBins>,
}

impl ExhaustiveModel {
    pub fn fit(
        predictor: Predictor,
        ds: &TaskDataset,
        rows: &[usize],
        bins: usize,
        neighbors: usize,
    ) -> Result<Self, StrategyError> {
        if rows.is_empty() {
            return Err(StrategyError::EmptyStore);
        }
        if bins == 0 || neighbors == 0 {
            return Err(StrategyError::InvalidConfig("bins and neighbors must be positive".into()));
        }
        let (store, store_observed, _) = ds.subset(rows);
        Self::from_store(predictor, &ds.catalog, store, store_observed, bins, neighbors)
    }

    pub fn from_store(
        predictor: Predictor,
        catalog: &FeatureCatalog,
        store: Array2<f64>,
        store_observed: Array2<f64>,
        bins: usize,
        neighbors: usize,
    ) -> Result<Self, StrategyError> {
        if store.nrows() == 0 {
            return Err(StrategyError::EmptyStore);
        }
        let n = store.nrows();
        let mut features = Vec::with_capacity(catalog.len());
        for j in 0..catalog.len() {
            let cols = catalog.columns(j);
            let observed: Vec<bool> = (0..n).map(|r| store_observed[[r, j]] > 0.5).collect();
            let fb = if catalog.entries()[j].kind.is_coded() {
                let width = cols.len();
                let centers = (0..width)
                    .map(|k| {
                        let mut v = vec![0.0; width];
                        v[k] = 1.0;
                        v
                    })
                    .collect();
                let row_bin = (0..n)
                    .map(|r| observed[r].then(|| cols.clone().position(|c| store[[r, c]] == 1.0)).flatten())
                    .collect();
                FeatureBins { centers, row_bin }
            } else {
                let c = cols.start;
                let values: Vec<f64> = (0..n).filter(|&r| observed[r]).map(|r| store[[r, c]]).collect();
                let edges = equal_frequency_edges(&values, bins);
                let k = edges.len() + 1;
                let mut sums = vec![0.0; k];
                let mut counts = vec![0usize; k];
                let row_bin: Vec<Option<usize>> = (0..n)
                    .map(|r| {
                        observed[r].then(|| {
                            let b = assign_bin(&edges, store[[r, c]]);
                            sums[b] += store[[r, c]];
                            counts[b] += 1;
                            b
                        })
                    })
                    .collect();
                let centers =
                    (0..k).map(|b| vec![if counts[b] > 0 { sums[b] / counts[b] as f64 } else { 0.0 }]).collect();
                FeatureBins { centers, row_bin }
            };
            features.push(fb);
        }
        Ok(ExhaustiveModel { predictor, bins, neighbors, store, store_observed, features })
    }

    /// Stored rows closest to the state on its acquired features; all rows
    /// when nothing is acquired.
    pub fn neighbors_of(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Vec<usize> {
        let acquired: Vec<usize> = (0..catalog.len()).filter(|&j| state.is_acquired(j)).collect();
        let n = self.store.nrows();
        if acquired.is_empty() {
            return (0..n).collect();
        }
        let values = state.values();
        let mut dist: Vec<(f64, usize)> = (0..n)
            .map(|r| {
                let d: f64 = acquired
                    .iter()
                    .flat_map(|&j| catalog.columns(j))
                    .map(|c| (self.store[[r, c]] - values[c]).powi(2))
                    .sum();
                (d, r)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.truncate(self.neighbors.min(n));
        dist.into_iter().map(|(_, r)| r).collect()
    }

    /// Bin distribution of feature `j` among `rows`, falling back to all
    /// stored rows when none of them observed it.
    pub fn bin_distribution(&self, j: usize, rows: &[usize]) -> Vec<f64> {
        let fb = &self.features[j];
        let mut counts = vec![0usize; fb.centers.len()];
        for &r in rows {
            if let Some(b) = fb.row_bin[r] {
                counts[b] += 1;
            }
        }
        if counts.iter().all(|&c| c == 0) {
            for b in fb.row_bin.iter().flatten() {
                counts[*b] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return vec![0.0; counts.len()];
        }
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// `Σ_b p̂(b | state) · ‖P(state with x_j = center_b) − P(state)‖₁`.
    pub fn utility_given(
        &self,
        state: &AcquisitionState,
        j: usize,
        catalog: &FeatureCatalog,
        distribution: &[f64],
        before: &[f64],
    ) -> Result<f64, StrategyError> {
        let fb = &self.features[j];
        let live: Vec<usize> = (0..distribution.len()).filter(|&b| distribution[b] > 0.0).collect();
        if live.is_empty() {
            return Ok(0.0);
        }
        let width = 2 * catalog.encoded_width();
        let mut batch = Array2::zeros((live.len(), width));
        for (i, &b) in live.iter().enumerate() {
            let next = state.query(j, &fb.centers[b], catalog)?;
            batch.row_mut(i).assign(&ndarray::ArrayView1::from(&next.masked_input(catalog)));
        }
        let after = self.predictor.probs_batch(batch.view())?;
        Ok(live
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let u: f64 = after.row(i).iter().zip(before).map(|(a, p)| (a - p).abs()).sum();
                distribution[b] * u
            })
            .sum())
    }

    pub fn utility(
        &self,
        state: &AcquisitionState,
        j: usize,
        catalog: &FeatureCatalog,
    ) -> Result<f64, StrategyError> {
        let rows = self.neighbors_of(state, catalog);
        let before = self.predictor.probs(state, catalog)?;
        self.utility_given(state, j, catalog, &self.bin_distribution(j, &rows), &before)
    }

    /// Utilities of each candidate (neighbors and baseline computed once).
    pub fn utilities(
        &self,
        state: &AcquisitionState,
        candidates: &[usize],
        catalog: &FeatureCatalog,
    ) -> Result<Vec<f64>, StrategyError> {
        let rows = self.neighbors_of(state, catalog);
        let before = self.predictor.probs(state, catalog)?;
        candidates
            .iter()
            .map(|&j| self.utility_given(state, j, catalog, &self.bin_distribution(j, &rows), &before))
            .collect()
    }

    /// Highest utility per unit cost among `candidates`.
    pub fn select(
        &self,
        state: &AcquisitionState,
        candidates: &[usize],
        catalog: &FeatureCatalog,
    ) -> Result<Option<usize>, StrategyError> {
        let u = self.utilities(state, candidates, catalog)?;
        Ok(pick_best(candidates, &u, catalog))
    }
}
