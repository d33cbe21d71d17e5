use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

/// `Train` and `StochasticEval` both sample dropout masks; only the former is
/// meant to be followed by a parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
    StochasticEval,
}

impl Mode {
    fn drops(self) -> bool {
        !matches!(self, Mode::Eval)
    }
}

/// One fully connected layer. Dropout is applied to the layer's input.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
    pub dropout: f64,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

/// Shape of a layer to be initialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation, dropout: f64) -> Self {
        LayerSpec { width, activation, dropout }
    }
}

/// Feed-forward chain of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer after dropout (what multiplies the weights).
    dropped: Vec<Array2<f64>>,
    /// Scaled dropout masks, `None` where no dropout was sampled.
    masks: Vec<Option<Array2<f64>>>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("non-empty net")
    }

    pub fn logits(&self) -> &Array2<f64> {
        self.pre.last().expect("non-empty net")
    }

    pub fn batch_size(&self) -> usize {
        self.output().nrows()
    }
}

/// Gradient seed at the network head.
#[derive(Debug, Clone)]
pub enum OutputGrad {
    /// dL/d(activated output)
    Output(Array2<f64>),
    /// dL/d(pre-activation); used for fused softmax/sigmoid losses.
    PreActivation(Array2<f64>),
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// `(dW, db)` per layer.
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
    /// dL/d(input), `batch × input_width`.
    pub input: Array2<f64>,
}

impl DenseNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidArchitecture("net has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(NnError::InvalidArchitecture(format!("layer {i}: bias length mismatch")));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(NnError::InvalidArchitecture(format!(
                    "layer {i} expects {} inputs but previous layer emits {}",
                    l.inputs(),
                    layers[i - 1].outputs()
                )));
            }
            if !(0.0..1.0).contains(&l.dropout) {
                return Err(NnError::InvalidArchitecture(format!("layer {i}: dropout {}", l.dropout)));
            }
            if l.activation == Activation::Softmax && i + 1 != layers.len() {
                return Err(NnError::InvalidArchitecture("softmax is only allowed on the head".into()));
            }
            if l.inputs() == 0 || l.outputs() == 0 {
                return Err(NnError::InvalidArchitecture(format!("layer {i} has zero width")));
            }
        }
        Ok(DenseNet { layers })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(input_width: usize, specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self, NnError> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut fan_in = input_width;
        for spec in specs {
            let limit = (6.0 / (fan_in + spec.width) as f64).sqrt();
            let weight =
                Array2::from_shape_fn((spec.width, fan_in), |_| rng.random_range(-limit..=limit));
            layers.push(Layer {
                weight,
                bias: Array1::zeros(spec.width),
                activation: spec.activation,
                dropout: spec.dropout,
            });
            fan_in = spec.width;
        }
        Self::new(layers)
    }

    /// Hidden relu layers followed by a head.
    pub fn mlp(
        input_width: usize,
        hidden: &[usize],
        dropout: f64,
        output_width: usize,
        head: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        let mut specs: Vec<LayerSpec> = hidden
            .iter()
            .enumerate()
            // no dropout on raw inputs
            .map(|(i, &w)| LayerSpec::new(w, Activation::Relu, if i == 0 { 0.0 } else { dropout }))
            .collect();
        specs.push(LayerSpec::new(output_width, head, if hidden.is_empty() { 0.0 } else { dropout }));
        Self::init(input_width, &specs, rng)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn head(&self) -> Activation {
        self.layers.last().expect("non-empty").activation
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| l.dropout > 0.0)
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Single-vector forward pass; dropout masks (if any) come from `seed`.
    pub fn forward(&self, input: &[f64], mode: Mode, seed: u64) -> Result<Vec<f64>, NnError> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|_| NnError::DimensionMismatch { expected: self.input_width(), found: input.len() })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cache = self.forward_batch(x, mode, &mut rng)?;
        Ok(cache.output().row(0).to_vec())
    }

    /// Deterministic eval-mode outputs for a batch.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward_batch(x, Mode::Eval, &mut rng)?.post.pop().expect("non-empty"))
    }

    pub fn forward_batch(
        &self,
        x: ArrayView2<f64>,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<ForwardCache, NnError> {
        if x.ncols() != self.input_width() {
            return Err(NnError::DimensionMismatch { expected: self.input_width(), found: x.ncols() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteInput);
        }
        let n = self.layers.len();
        let mut cache = ForwardCache {
            dropped: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
        };
        let mut current = x.to_owned();
        for layer in &self.layers {
            let mask = if mode.drops() && layer.dropout > 0.0 {
                let keep = 1.0 - layer.dropout;
                let scale = 1.0 / keep;
                let m = Array2::from_shape_fn(current.raw_dim(), |_| {
                    if rng.random::<f64>() < layer.dropout {
                        0.0
                    } else {
                        scale
                    }
                });
                current *= &m;
                Some(m)
            } else {
                None
            };
            let z = current.dot(&layer.weight.t()) + &layer.bias;
            let a = activate(layer.activation, &z);
            cache.dropped.push(current);
            cache.masks.push(mask);
            cache.pre.push(z);
            current = a.clone();
            cache.post.push(a);
        }
        Ok(cache)
    }

    pub fn backward(&self, cache: &ForwardCache, grad: OutputGrad) -> Result<Gradients, NnError> {
        let n = self.layers.len();
        if cache.pre.len() != n
            || cache
                .dropped
                .iter()
                .zip(&self.layers)
                .any(|(d, l)| d.ncols() != l.inputs())
        {
            return Err(NnError::StaleCache);
        }
        let batch = cache.batch_size();
        let mut dz = match grad {
            OutputGrad::PreActivation(g) => g,
            OutputGrad::Output(g) => {
                activation_backward(self.layers[n - 1].activation, &cache.pre[n - 1], &cache.post[n - 1], &g)
            }
        };
        if dz.dim() != (batch, self.output_width()) {
            return Err(NnError::StaleCache);
        }
        let mut grads = Vec::with_capacity(n);
        let mut input_grad = Array2::zeros((0, 0));
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let dw = dz.t().dot(&cache.dropped[i]);
            let db = dz.sum_axis(Axis(0));
            let mut d_in = dz.dot(&layer.weight);
            if let Some(mask) = &cache.masks[i] {
                d_in *= mask;
            }
            grads.push((dw, db));
            if i == 0 {
                input_grad = d_in;
            } else {
                let prev = &self.layers[i - 1];
                dz = activation_backward(prev.activation, &cache.pre[i - 1], &cache.post[i - 1], &d_in);
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads, input: input_grad })
    }
}

fn activate(act: Activation, z: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Identity => z.clone(),
        Activation::Relu => z.mapv(|v| v.max(0.0)),
        Activation::Sigmoid => z.mapv(sigmoid),
        Activation::Softmax => {
            let mut out = z.clone();
            for mut row in out.rows_mut() {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                row.mapv_inplace(|v| (v - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|v| v / sum);
            }
            out
        }
    }
}

fn activation_backward(
    act: Activation,
    z: &Array2<f64>,
    a: &Array2<f64>,
    g: &Array2<f64>,
) -> Array2<f64> {
    match act {
        Activation::Identity => g.clone(),
        Activation::Relu => {
            let mut out = g.clone();
            out.zip_mut_with(z, |o, &zv| {
                if zv <= 0.0 {
                    *o = 0.0
                }
            });
            out
        }
        Activation::Sigmoid => {
            let mut out = g.clone();
            out.zip_mut_with(a, |o, &av| *o *= av * (1.0 - av));
            out
        }
        Activation::Softmax => {
            let dot = (g * a).sum_axis(Axis(1)).insert_axis(Axis(1));
            a * &(g - &dot)
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
