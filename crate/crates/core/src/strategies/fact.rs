//! Gradient-based sensitivity over a binary feature representation, with a
//! denoising autoencoder supplying the distribution of missing bits.

use ndarray::{Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::predictor::random_masks;
use super::{pick_best, StrategyError};
use crate::acquisition::{AcquisitionState, FeatureCatalog};
use crate::data::TaskDataset;
use crate::nn::{
    argmax, train_epoch, Activation, AdamConfig, AdamState, BinaryEncoder, DenoisingAutoencoder, DenseNet,
    Loss, Mode, OutputGrad, Targets,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactConfig {
    pub levels: usize,
    pub dae_hidden: Vec<usize>,
    pub dae_epochs: usize,
    pub corruption_rate: f64,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for FactConfig {
    fn default() -> Self {
        FactConfig {
            levels: crate::nn::DEFAULT_LEVELS,
            dae_hidden: vec![64],
            dae_epochs: 40,
            corruption_rate: 0.5,
            hidden: vec![64, 64],
            epochs: 40,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactModel {
    pub encoder: BinaryEncoder,
    pub dae: DenoisingAutoencoder,
    /// Softmax classifier over the (partly posterior) bit vector.
    pub predictor: DenseNet,
    pub num_classes: usize,
    pub trained: bool,
}

/// Posterior bit vectors for a batch of rows under the given masks; observed
/// columns keep their hard bits.
fn posterior_batch(
    encoder: &BinaryEncoder,
    dae: &DenoisingAutoencoder,
    catalog: &FeatureCatalog,
    rows: &[&[f64]],
    masks: &[Vec<bool>],
) -> Result<Array2<f64>, StrategyError> {
    let w = encoder.code_width();
    let l = encoder.levels;
    let mut corrupted = Array2::zeros((rows.len(), w));
    let mut hard = Array2::zeros((rows.len(), w));
    for (i, (row, mask)) in rows.iter().zip(masks).enumerate() {
        let bits = encoder.hard_bits(row);
        hard.row_mut(i).assign(&ArrayView1::from(&bits));
        let mut col_mask = vec![0.0; encoder.columns()];
        for (j, &m) in mask.iter().enumerate() {
            if m {
                catalog.columns(j).for_each(|c| col_mask[c] = 1.0);
            }
        }
        let mut c_bits = bits;
        for (c, &m) in col_mask.iter().enumerate() {
            if m < 0.5 {
                c_bits[c * l..(c + 1) * l].iter_mut().for_each(|b| *b = 0.5);
            }
        }
        corrupted.row_mut(i).assign(&ArrayView1::from(&c_bits));
    }
    let mut out = dae.net.predict(corrupted.view())?;
    for (i, mask) in masks.iter().enumerate() {
        for (j, &m) in mask.iter().enumerate() {
            if m {
                for c in catalog.columns(j) {
                    for k in c * l..(c + 1) * l {
                        out[[i, k]] = hard[[i, k]];
                    }
                }
            }
        }
    }
    Ok(out)
}

impl FactModel {
    pub fn train(ds: &TaskDataset, rows: &[usize], cfg: &FactConfig, seed: u64) -> Result<Self, StrategyError> {
        if rows.is_empty() {
            return Err(StrategyError::InvalidConfig("no training rows".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let catalog = &ds.catalog;
        let (x, observed, labels) = ds.subset(rows);
        let col_avail = {
            let mut a = Array2::zeros(x.dim());
            for j in 0..catalog.len() {
                for c in catalog.columns(j) {
                    a.column_mut(c).assign(&observed.column(j));
                }
            }
            a
        };
        let encoder = BinaryEncoder::fit(x.view(), col_avail.view(), cfg.levels)?;
        let adam = AdamConfig::default().with_learning_rate(cfg.learning_rate);

        let mut dae = DenoisingAutoencoder::new(encoder.code_width(), &cfg.dae_hidden, cfg.corruption_rate, &mut rng)?;
        let mut dae_state = AdamState::new(&dae.net);
        for _ in 0..cfg.dae_epochs {
            dae.train_epoch(&encoder, catalog, x.view(), observed.view(), &adam, &mut dae_state, &mut rng)?;
        }

        let mut predictor =
            DenseNet::mlp(encoder.code_width(), &cfg.hidden, 0.0, ds.num_classes, Activation::Softmax, &mut rng)?;
        let mut state = AdamState::new(&predictor);
        let row_refs: Vec<&[f64]> = (0..x.nrows()).map(|r| x.row(r).to_slice().expect("standard layout")).collect();
        for _ in 0..cfg.epochs {
            let masks = random_masks(rows.len(), catalog.len(), &mut rng);
            let inputs = posterior_batch(&encoder, &dae, catalog, &row_refs, &masks)?;
            train_epoch(
                &mut predictor,
                inputs.view(),
                Targets::Classes(&labels),
                None,
                Loss::CrossEntropy,
                &adam,
                &mut state,
                &mut rng,
            )?;
        }
        Ok(FactModel { encoder, dae, predictor, num_classes: ds.num_classes, trained: true })
    }

    fn check(&self) -> Result<(), StrategyError> {
        if self.trained {
            Ok(())
        } else {
            Err(StrategyError::UntrainedModel)
        }
    }

    /// Predictor input for a state: hard bits where acquired, autoencoder
    /// posteriors elsewhere.
    pub fn input(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Result<Vec<f64>, StrategyError> {
        let p = self.dae.missing_posteriors(&self.encoder, catalog, state)?;
        Ok(p.into_raw_vec_and_offset().0)
    }

    pub fn probs(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Result<Vec<f64>, StrategyError> {
        self.check()?;
        Ok(self.predictor.forward(&self.input(state, catalog)?, Mode::Eval, 0)?)
    }

    pub fn predict(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Result<usize, StrategyError> {
        Ok(argmax(&self.probs(state, catalog)?))
    }

    /// Per-feature `Σ_m |∂h_max/∂b_{j,m}| · p̂(b_{j,m} = 1)` from one forward
    /// and one backward pass through the stacked autoencoder and classifier
    /// (not yet divided by cost). Gradients are taken at the autoencoder's
    /// binary input, so a missing feature also counts through the
    /// posteriors it would change.
    pub fn sensitivities(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Result<Vec<f64>, StrategyError> {
        self.check()?;
        let l = self.encoder.levels;
        let col_mask = state.column_mask(catalog);
        let z = self.encoder.corrupted_bits(state.values(), &col_mask);
        let bit_observed: Vec<bool> = (0..z.len()).map(|k| col_mask[k / l] > 0.5).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let zv = ndarray::ArrayView2::from_shape((1, z.len()), &z).expect("row");
        let dae_cache = self.dae.net.forward_batch(zv, Mode::Eval, &mut rng)?;
        let mut x = dae_cache.output().clone();
        for (k, &o) in bit_observed.iter().enumerate() {
            if o {
                x[[0, k]] = z[k];
            }
        }
        let cache = self.predictor.forward_batch(x.view(), Mode::Eval, &mut rng)?;
        let probs = cache.output().row(0).to_vec();
        let top = argmax(&probs);
        let mut seed = Array2::zeros((1, probs.len()));
        seed[[0, top]] = 1.0;
        let g_x = self.predictor.backward(&cache, OutputGrad::Output(seed))?.input;
        let mut through_dae = g_x.clone();
        for (k, &o) in bit_observed.iter().enumerate() {
            if o {
                through_dae[[0, k]] = 0.0;
            }
        }
        let g_z = self.dae.net.backward(&dae_cache, OutputGrad::Output(through_dae))?.input;
        Ok((0..catalog.len())
            .map(|j| {
                catalog
                    .columns(j)
                    .flat_map(|c| c * l..(c + 1) * l)
                    .map(|k| {
                        let direct = if bit_observed[k] { g_x[[0, k]] } else { 0.0 };
                        (g_z[[0, k]] + direct).abs() * x[[0, k]]
                    })
                    .sum()
            })
            .collect())
    }

    pub fn select(
        &self,
        state: &AcquisitionState,
        candidates: &[usize],
        catalog: &FeatureCatalog,
    ) -> Result<Option<usize>, StrategyError> {
        let s = self.sensitivities(state, catalog)?;
        let u: Vec<f64> = candidates.iter().map(|&j| s[j]).collect();
        Ok(pick_best(candidates, &u, catalog))
    }

    pub fn full_accuracy(&self, ds: &TaskDataset, rows: &[usize]) -> Result<f64, StrategyError> {
        let refs: Vec<&[f64]> = rows.iter().map(|&r| ds.row(r)).collect();
        let masks = vec![vec![true; ds.num_features()]; rows.len()];
        let inputs = posterior_batch(&self.encoder, &self.dae, &ds.catalog, &refs, &masks)?;
        let labels: Vec<usize> = rows.iter().map(|&r| ds.labels[r]).collect();
        Ok(crate::nn::accuracy(&self.predictor, inputs.view(), &labels)?)
    }
}
