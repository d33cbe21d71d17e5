use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, DenseNet, Gradients, Mode, NnError, OutputGrad};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    /// L2 penalty on weights (not biases), added to the gradient.
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size > 0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// First/second moment estimates for one net.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
    t: i32,
}

impl AdamState {
    pub fn new(net: &DenseNet) -> Self {
        let zeros: Vec<_> = net
            .layers()
            .iter()
            .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.len())))
            .collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0 }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients, cfg: &AdamConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let bc1 = 1.0 - b1.powi(self.t);
        let bc2 = 1.0 - b2.powi(self.t);
        let lr = cfg.learning_rate;
        let eps = cfg.epsilon;
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[i];
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            ndarray::Zip::from(&mut layer.weight)
                .and(gw)
                .and(mw)
                .and(vw)
                .for_each(|w, &g, m, v| {
                    let g = g + cfg.weight_decay * *w;
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
            ndarray::Zip::from(&mut layer.bias)
                .and(gb)
                .and(mb)
                .and(vb)
                .for_each(|b, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *b -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// Softmax head, class-index targets.
    CrossEntropy,
    /// Sigmoid head, targets in [0, 1].
    BernoulliReconstruction,
    Squared,
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes(&'a [usize]),
    Values(ArrayView2<'a, f64>),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.nrows(),
        }
    }
}

const PROB_FLOOR: f64 = 1e-12;

/// Mean per-example loss and the matching head gradient. `weights` (same
/// shape as the output) masks or reweights individual outputs for the
/// element-wise losses.
pub fn loss_and_grad(
    loss: Loss,
    net: &DenseNet,
    output: &Array2<f64>,
    targets: Targets<'_>,
    weights: Option<ArrayView2<f64>>,
) -> Result<(f64, OutputGrad), NnError> {
    let n = output.nrows() as f64;
    if targets.len() != output.nrows() {
        return Err(NnError::DimensionMismatch { expected: output.nrows(), found: targets.len() });
    }
    match (loss, targets) {
        (Loss::CrossEntropy, Targets::Classes(classes)) => {
            if net.head() != Activation::Softmax {
                return Err(NnError::InvalidConfig("cross-entropy needs a softmax head".into()));
            }
            let mut grad = output.clone();
            let mut total = 0.0;
            for (i, &c) in classes.iter().enumerate() {
                if c >= output.ncols() {
                    return Err(NnError::DimensionMismatch { expected: output.ncols(), found: c + 1 });
                }
                total -= output[[i, c]].max(PROB_FLOOR).ln();
                grad[[i, c]] -= 1.0;
            }
            grad /= n;
            Ok((total / n, OutputGrad::PreActivation(grad)))
        }
        (Loss::BernoulliReconstruction, Targets::Values(y)) => {
            if net.head() != Activation::Sigmoid {
                return Err(NnError::InvalidConfig("bernoulli loss needs a sigmoid head".into()));
            }
            check_shape(output, &y)?;
            let mut grad = output - &y;
            let mut total = 0.0;
            ndarray::Zip::from(output).and(&y).for_each(|&p, &t| {
                let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
            });
            if let Some(w) = weights {
                check_shape(output, &w)?;
                grad *= &w;
                total = 0.0;
                ndarray::Zip::from(output).and(&y).and(&w).for_each(|&p, &t, &wt| {
                    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                    total -= wt * (t * p.ln() + (1.0 - t) * (1.0 - p).ln());
                });
            }
            grad /= n;
            Ok((total / n, OutputGrad::PreActivation(grad)))
        }
        (Loss::Squared, Targets::Values(y)) => {
            check_shape(output, &y)?;
            let mut diff = output - &y;
            if let Some(w) = weights {
                check_shape(output, &w)?;
                diff *= &w.mapv(f64::sqrt);
            }
            let total = diff.mapv(|v| v * v).sum();
            if let Some(w) = weights {
                diff *= &w.mapv(f64::sqrt);
            }
            Ok((total / n, OutputGrad::Output(diff * (2.0 / n))))
        }
        _ => Err(NnError::InvalidConfig(format!("{loss:?} does not accept these targets"))),
    }
}

fn check_shape(output: &Array2<f64>, other: &ArrayView2<f64>) -> Result<(), NnError> {
    if output.dim() != other.dim() {
        return Err(NnError::DimensionMismatch { expected: output.ncols(), found: other.ncols() });
    }
    Ok(())
}

/// One full-gradient Adam step on a prepared batch; returns the batch loss.
pub fn train_batch(
    net: &mut DenseNet,
    x: ArrayView2<f64>,
    targets: Targets<'_>,
    weights: Option<ArrayView2<f64>>,
    loss: Loss,
    adam: &AdamConfig,
    state: &mut AdamState,
    rng: &mut impl Rng,
) -> Result<f64, NnError> {
    let cache = net.forward_batch(x, Mode::Train, rng)?;
    let (value, grad) = loss_and_grad(loss, net, cache.output(), targets, weights)?;
    if !value.is_finite() {
        return Err(NnError::NonFiniteLoss(value));
    }
    let grads = net.backward(&cache, grad)?;
    state.step(net, &grads, adam);
    Ok(value)
}

/// Shuffled minibatch pass over the whole dataset; returns the mean batch
/// loss weighted by batch size.
pub fn train_epoch(
    net: &mut DenseNet,
    x: ArrayView2<f64>,
    targets: Targets<'_>,
    weights: Option<ArrayView2<f64>>,
    loss: Loss,
    adam: &AdamConfig,
    state: &mut AdamState,
    rng: &mut impl Rng,
) -> Result<f64, NnError> {
    adam.validate()?;
    let n = x.nrows();
    if targets.len() != n {
        return Err(NnError::DimensionMismatch { expected: n, found: targets.len() });
    }
    if n == 0 {
        return Err(NnError::InvalidConfig("empty training set".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for chunk in order.chunks(adam.batch_size) {
        let xb = x.select(Axis(0), chunk);
        let wb = weights.map(|w| w.select(Axis(0), chunk));
        let value = match targets {
            Targets::Classes(c) => {
                let cb: Vec<usize> = chunk.iter().map(|&i| c[i]).collect();
                train_batch(net, xb.view(), Targets::Classes(&cb), wb.as_ref().map(|w| w.view()), loss, adam, state, rng)?
            }
            Targets::Values(v) => {
                let vb = v.select(Axis(0), chunk);
                train_batch(net, xb.view(), Targets::Values(vb.view()), wb.as_ref().map(|w| w.view()), loss, adam, state, rng)?
            }
        };
        total += value * chunk.len() as f64;
    }
    Ok(total / n as f64)
}

/// Eval-mode top-1 accuracy of a softmax classifier.
pub fn accuracy(net: &DenseNet, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64, NnError> {
    let probs = net.predict(x)?;
    let correct = probs
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &y)| argmax(row.as_slice().expect("contiguous")) == y)
        .count();
    Ok(correct as f64 / labels.len().max(1) as f64)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn separable_toy(rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<usize>) {
        let mut x = Array2::zeros((200, 2));
        let mut y = Vec::with_capacity(200);
        for i in 0..200 {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            // margin around the separating line a + b = 0
            let shift = if a + b >= 0.0 { 0.2 } else { -0.2 };
            x[[i, 0]] = a + shift;
            x[[i, 1]] = b + shift;
            y.push(usize::from(a + b >= 0.0));
        }
        (x, y)
    }

    #[test]
    fn logistic_head_separates_toy() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (x, y) = separable_toy(&mut rng);
        let mut net = DenseNet::mlp(2, &[], 0.0, 2, Activation::Softmax, &mut rng).unwrap();
        let cfg = AdamConfig { learning_rate: 0.05, batch_size: 32, ..AdamConfig::default() };
        let mut state = AdamState::new(&net);
        let mut losses = Vec::new();
        for _ in 0..200 {
            losses.push(
                train_epoch(&mut net, x.view(), Targets::Classes(&y), None, Loss::CrossEntropy, &cfg, &mut state, &mut rng)
                    .unwrap(),
            );
        }
        assert!(losses[9] <= losses[0]);
        assert!(accuracy(&net, x.view(), &y).unwrap() >= 0.99);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (x, y) = separable_toy(&mut rng);
        let mut net = DenseNet::mlp(2, &[4], 0.1, 2, Activation::Softmax, &mut rng).unwrap();
        let before = net.clone();
        let cfg = AdamConfig::default().with_learning_rate(0.0);
        let mut state = AdamState::new(&net);
        train_epoch(&mut net, x.view(), Targets::Classes(&y), None, Loss::CrossEntropy, &cfg, &mut state, &mut rng)
            .unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn mismatched_targets_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = DenseNet::mlp(2, &[], 0.0, 2, Activation::Softmax, &mut rng).unwrap();
        let mut state = AdamState::new(&net);
        let x = Array2::zeros((3, 2));
        let r = train_epoch(&mut net, x.view(), Targets::Classes(&[0, 1]), None, Loss::CrossEntropy, &AdamConfig::default(), &mut state, &mut rng);
        assert!(matches!(r, Err(NnError::DimensionMismatch { .. })));
        let y = Array2::zeros((3, 2));
        let r = train_epoch(&mut net, x.view(), Targets::Values(y.view()), None, Loss::BernoulliReconstruction, &AdamConfig::default(), &mut state, &mut rng);
        assert!(matches!(r, Err(NnError::InvalidConfig(_))));
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = DenseNet::mlp(1, &[], 0.0, 1, Activation::Identity, &mut rng).unwrap();
        net.layers_mut()[0].weight[[0, 0]] = 1e300;
        let mut state = AdamState::new(&net);
        let x = ndarray::array![[1e10]];
        let y = ndarray::array![[0.0]];
        let r = train_epoch(&mut net, x.view(), Targets::Values(y.view()), None, Loss::Squared, &AdamConfig::default(), &mut state, &mut rng);
        assert!(matches!(r, Err(NnError::NonFiniteLoss(_))));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
