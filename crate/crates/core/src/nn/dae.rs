use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    train_epoch, Activation, AdamConfig, AdamState, BinaryEncoder, DenseNet, Layer, Loss,
    NnError, Targets,
};
use crate::acquisition::{AcquisitionState, FeatureCatalog};

/// Denoising autoencoder over the binary representation of a partial state:
/// unknown feature bits enter as 0.5 and come back as Bernoulli posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoisingAutoencoder {
    pub net: DenseNet,
    pub corruption_rate: f64,
}

impl DenoisingAutoencoder {
    pub fn new(
        code_width: usize,
        hidden: &[usize],
        corruption_rate: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&corruption_rate) {
            return Err(NnError::InvalidConfig(format!("corruption rate {corruption_rate}")));
        }
        let net = DenseNet::mlp(code_width, hidden, 0.0, code_width, Activation::Sigmoid, rng)?;
        Ok(DenoisingAutoencoder { net, corruption_rate })
    }

    /// All-zero weights: every posterior is exactly 0.5.
    pub fn zeroed(code_width: usize) -> Self {
        let net = DenseNet::new(vec![Layer {
            weight: Array2::zeros((code_width, code_width)),
            bias: ndarray::Array1::zeros(code_width),
            activation: Activation::Sigmoid,
            dropout: 0.0,
        }])
        .expect("square layer");
        DenoisingAutoencoder { net, corruption_rate: 0.5 }
    }

    pub fn code_width(&self) -> usize {
        self.net.input_width()
    }

    /// One epoch of denoising training. Each observed feature's bit group is
    /// blanked with probability `corruption_rate`; features missing in the
    /// data are blanked and excluded from the reconstruction loss.
    pub fn train_epoch(
        &mut self,
        encoder: &BinaryEncoder,
        catalog: &FeatureCatalog,
        x: ArrayView2<f64>,
        availability: ArrayView2<f64>,
        adam: &AdamConfig,
        state: &mut AdamState,
        rng: &mut impl Rng,
    ) -> Result<f64, NnError> {
        let width = encoder.code_width();
        if width != self.code_width() || x.ncols() != catalog.encoded_width() {
            return Err(NnError::DimensionMismatch { expected: self.code_width(), found: width });
        }
        let n = x.nrows();
        let l = encoder.levels;
        let mut inputs = Array2::zeros((n, width));
        let mut targets = Array2::zeros((n, width));
        let mut weights = Array2::ones((n, width));
        for r in 0..n {
            let row = x.row(r);
            let bits = encoder.hard_bits(row.as_slice().expect("row-major"));
            for (c, b) in bits.iter().enumerate() {
                targets[[r, c]] = *b;
                inputs[[r, c]] = *b;
            }
            for j in 0..catalog.len() {
                let observed = availability[[r, j]] > 0.5;
                let blank = !observed || rng.random::<f64>() < self.corruption_rate;
                if blank {
                    for col in catalog.columns(j) {
                        for m in 0..l {
                            inputs[[r, col * l + m]] = 0.5;
                            if !observed {
                                weights[[r, col * l + m]] = 0.0;
                            }
                        }
                    }
                }
            }
        }
        train_epoch(
            &mut self.net,
            inputs.view(),
            Targets::Values(targets.view()),
            Some(weights.view()),
            Loss::BernoulliReconstruction,
            adam,
            state,
            rng,
        )
    }

    /// Posterior `p(bit = 1 | acquired features)` per encoded column and
    /// level (`columns × levels`); acquired columns carry their hard bits.
    pub fn missing_posteriors(
        &self,
        encoder: &BinaryEncoder,
        catalog: &FeatureCatalog,
        state: &AcquisitionState,
    ) -> Result<Array2<f64>, NnError> {
        if encoder.code_width() != self.code_width()
            || state.values().len() != encoder.columns()
            || catalog.encoded_width() != encoder.columns()
        {
            return Err(NnError::DimensionMismatch {
                expected: self.code_width(),
                found: state.values().len() * encoder.levels,
            });
        }
        let mask = state.column_mask(catalog);
        let input = encoder.corrupted_bits(state.values(), &mask);
        let mut out = self.net.forward(&input, super::Mode::Eval, 0)?;
        for (c, &m) in mask.iter().enumerate() {
            if m > 0.5 {
                let l = encoder.levels;
                out[c * l..(c + 1) * l].copy_from_slice(&input[c * l..(c + 1) * l]);
            }
        }
        Ok(Array2::from_shape_vec((encoder.columns(), encoder.levels), out).expect("shape"))
    }
}
