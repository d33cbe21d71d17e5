use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Activation, DenseNet, Mode, NnError};

/// Default number of stochastic passes.
pub const DEFAULT_MC_SAMPLES: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct Certainty {
    /// Largest entry of `mean_probs`.
    pub certainty: f64,
    pub mean_probs: Vec<f64>,
}

/// Monte-Carlo dropout certainty: average the class probabilities of
/// `samples` dropout-perturbed passes and report the top averaged probability.
pub fn mc_certainty(
    net: &DenseNet,
    input: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Certainty, NnError> {
    if net.head() != Activation::Softmax {
        return Err(NnError::InvalidConfig("certainty needs a softmax head".into()));
    }
    if samples == 0 {
        return Err(NnError::InvalidConfig("at least one MC sample is required".into()));
    }
    if input.len() != net.input_width() {
        return Err(NnError::DimensionMismatch { expected: net.input_width(), found: input.len() });
    }
    let mean = if net.has_dropout() {
        let row = ndarray::ArrayView1::from(input);
        let batch = Array2::from_shape_fn((samples, input.len()), |(_, j)| row[j]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cache = net.forward_batch(batch.view(), Mode::StochasticEval, &mut rng)?;
        cache.output().mean_axis(Axis(0)).expect("samples > 0").to_vec()
    } else {
        net.forward(input, Mode::Eval, seed)?
    };
    let certainty = mean.iter().cloned().fold(0.0, f64::max);
    Ok(Certainty { certainty, mean_probs: mean })
}
