use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StrategyError;
use crate::acquisition::{AcquisitionState, FeatureCatalog};
use crate::data::TaskDataset;
use crate::nn::{
    argmax, mc_certainty, train_epoch, Activation, AdamConfig, AdamState, Certainty, DenseNet, Loss, Mode,
    Targets,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig { hidden: vec![64, 64], dropout: 0.2, epochs: 40, learning_rate: 1e-3, batch_size: 64 }
    }
}

impl PredictorConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { batch_size: self.batch_size, ..AdamConfig::default().with_learning_rate(self.learning_rate) }
    }
}

/// Per-row random observation masks: each row draws a keep rate uniformly,
/// then keeps each feature independently at that rate.
pub fn random_masks(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<bool>> {
    (0..n)
        .map(|_| {
            let keep: f64 = rng.random();
            (0..d).map(|_| rng.random::<f64>() < keep).collect()
        })
        .collect()
}

/// `values ⊙ mask ++ mask`, expanded over encoded columns.
pub fn masked_row(catalog: &FeatureCatalog, row: &[f64], mask: &[bool]) -> Vec<f64> {
    let width = catalog.encoded_width();
    let mut out = vec![0.0; 2 * width];
    for (j, &m) in mask.iter().enumerate() {
        if m {
            for c in catalog.columns(j) {
                out[c] = row[c];
                out[width + c] = 1.0;
            }
        }
    }
    out
}

/// Classifier over partially observed inputs (masked values plus the mask).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub net: DenseNet,
    pub num_classes: usize,
}

impl Predictor {
    pub fn train(
        ds: &TaskDataset,
        rows: &[usize],
        cfg: &PredictorConfig,
        seed: u64,
    ) -> Result<(Self, Vec<f64>), StrategyError> {
        if rows.is_empty() {
            return Err(StrategyError::InvalidConfig("no training rows".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = ds.catalog.encoded_width();
        let mut net = DenseNet::mlp(2 * width, &cfg.hidden, cfg.dropout, ds.num_classes, Activation::Softmax, &mut rng)?;
        let adam = cfg.adam();
        let mut state = AdamState::new(&net);
        let labels: Vec<usize> = rows.iter().map(|&r| ds.labels[r]).collect();
        let mut losses = Vec::with_capacity(cfg.epochs);
        for _ in 0..cfg.epochs {
            let masks = random_masks(rows.len(), ds.num_features(), &mut rng);
            let mut x = Array2::zeros((rows.len(), 2 * width));
            for (i, (&r, m)) in rows.iter().zip(&masks).enumerate() {
                let v = masked_row(&ds.catalog, ds.row(r), m);
                x.row_mut(i).assign(&ndarray::ArrayView1::from(&v));
            }
            let loss = train_epoch(&mut net, x.view(), Targets::Classes(&labels), None, Loss::CrossEntropy, &adam, &mut state, &mut rng)?;
            losses.push(loss);
        }
        Ok((Predictor { net, num_classes: ds.num_classes }, losses))
    }

    pub fn probs_input(&self, input: &[f64]) -> Result<Vec<f64>, StrategyError> {
        Ok(self.net.forward(input, Mode::Eval, 0)?)
    }

    pub fn probs_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>, StrategyError> {
        Ok(self.net.predict(inputs)?)
    }

    pub fn probs(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Result<Vec<f64>, StrategyError> {
        self.probs_input(&state.masked_input(catalog))
    }

    pub fn predict(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Result<usize, StrategyError> {
        Ok(argmax(&self.probs(state, catalog)?))
    }

    pub fn certainty(
        &self,
        state: &AcquisitionState,
        catalog: &FeatureCatalog,
        samples: usize,
        seed: u64,
    ) -> Result<Certainty, StrategyError> {
        Ok(mc_certainty(&self.net, &state.masked_input(catalog), samples, seed)?)
    }

    /// Accuracy with every feature observed.
    pub fn full_accuracy(&self, ds: &TaskDataset, rows: &[usize]) -> Result<f64, StrategyError> {
        let all = vec![true; ds.num_features()];
        let width = ds.catalog.encoded_width();
        let mut x = Array2::zeros((rows.len(), 2 * width));
        for (i, &r) in rows.iter().enumerate() {
            x.row_mut(i).assign(&ndarray::ArrayView1::from(&masked_row(&ds.catalog, ds.row(r), &all)));
        }
        let labels: Vec<usize> = rows.iter().map(|&r| ds.labels[r]).collect();
        Ok(crate::nn::accuracy(&self.net, x.view(), &labels)?)
    }
}
