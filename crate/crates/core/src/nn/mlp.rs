//! Dense feed-forward network with exact backpropagation.
//!
//! The model is a stack of affine layers, each followed by an element-wise
//! activation. Softmax is folded into the cross-entropy loss rather than
//! applied at the output layer, so the final layer is typically `identity`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Element-wise activation applied after a layer's affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    Tanh,
    Identity,
}

impl ActivationKind {
    pub(crate) fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            ActivationKind::Relu => {
                if z > S::zero() {
                    z
                } else {
                    S::zero()
                }
            }
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation `z`.
    pub(crate) fn derivative<S: Scalar>(self, z: S) -> S {
        match self {
            ActivationKind::Relu => {
                if z > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            ActivationKind::Tanh => {
                let t = z.tanh();
                S::one() - t * t
            }
            ActivationKind::Identity => S::one(),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            ActivationKind::Relu => 0,
            ActivationKind::Tanh => 1,
            ActivationKind::Identity => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ActivationKind::Relu),
            1 => Some(ActivationKind::Tanh),
            2 => Some(ActivationKind::Identity),
            _ => None,
        }
    }
}

/// Declarative description of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: ActivationKind,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: ActivationKind) -> Self {
        LayerSpec {
            input_dim,
            output_dim,
            activation,
        }
    }
}

/// One trained layer: weights `[out x in]`, biases `[out]`, activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<S: Scalar> {
    pub weights: Matrix<S>,
    pub biases: Vec<S>,
    pub activation: ActivationKind,
}

impl<S: Scalar> Layer<S> {
    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Multi-layer perceptron; consecutive layer dimensions chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<S: Scalar> {
    layers: Vec<Layer<S>>,
}

/// Flat parameter snapshot mirroring an [`MlpModel`]'s layout.
///
/// Round-trips losslessly to and from the model it was taken from; two
/// snapshots built from the same layer specs always have identical shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S: Scalar> {
    pub layers: Vec<ParamLayer<S>>,
}

/// One layer's slice of a [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayer<S: Scalar> {
    pub weights: Matrix<S>,
    pub biases: Vec<S>,
    pub activation: ActivationKind,
}

/// Parameter-shaped gradient sums plus the number of samples they cover.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<S: Scalar> {
    pub values: ModelParams<S>,
    pub sample_count: usize,
}

/// Everything `backward` needs from a forward pass: the input batch and,
/// per layer, the pre-activation and activated outputs.
#[derive(Debug, Clone)]
pub struct ForwardCache<S: Scalar> {
    pub(crate) input: Matrix<S>,
    pub(crate) pre_activations: Vec<Matrix<S>>,
    pub(crate) activations: Vec<Matrix<S>>,
}

impl<S: Scalar> ForwardCache<S> {
    /// Final-layer activated outputs (the logits when the last layer is `identity`).
    pub fn logits(&self) -> &Matrix<S> {
        self.activations.last().expect("model has at least one layer")
    }
}

impl<S: Scalar> MlpModel<S> {
    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<S>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.biases.len())
            .sum()
    }

    /// Snapshots all parameters in layer order.
    pub fn to_params(&self) -> ModelParams<S> {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| ParamLayer {
                    weights: l.weights.clone(),
                    biases: l.biases.clone(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    /// Rebuilds a model from a parameter snapshot.
    pub fn from_params(params: ModelParams<S>) -> Result<Self> {
        if params.layers.is_empty() {
            return Err(Error::shape("empty parameter set".to_string()));
        }
        for pair in params.layers.windows(2) {
            if pair[0].weights.rows() != pair[1].weights.cols() {
                return Err(Error::shape(format!(
                    "layer outputs {} do not chain into next layer inputs {}",
                    pair[0].weights.rows(),
                    pair[1].weights.cols()
                )));
            }
        }
        let layers = params
            .layers
            .into_iter()
            .map(|p| Layer {
                weights: p.weights,
                biases: p.biases,
                activation: p.activation,
            })
            .collect();
        Ok(MlpModel { layers })
    }

    /// Overwrites this model's parameters in place from a congruent snapshot.
    pub fn load_params(&mut self, params: &ModelParams<S>) -> Result<()> {
        if !self.to_params().same_shape(params) {
            return Err(Error::shape(
                "parameter snapshot does not match model shape".to_string(),
            ));
        }
        for (layer, p) in self.layers.iter_mut().zip(&params.layers) {
            layer.weights = p.weights.clone();
            layer.biases = p.biases.clone();
        }
        Ok(())
    }
}

impl<S: Scalar> ModelParams<S> {
    pub fn same_shape(&self, other: &ModelParams<S>) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.same_shape(&b.weights)
                    && a.biases.len() == b.biases.len()
                    && a.activation == b.activation
            })
    }

    pub fn zeros_like(&self) -> ModelParams<S> {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| ParamLayer {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    biases: vec![S::zero(); l.biases.len()],
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn entry_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.biases.len())
            .sum()
    }

    /// Visits every parameter entry in layer order (weights then biases).
    pub fn for_each_entry(&self, mut f: impl FnMut(S)) {
        for layer in &self.layers {
            for &w in layer.weights.data() {
                f(w);
            }
            for &b in &layer.biases {
                f(b);
            }
        }
    }

    /// In-place `self[i] = f(self[i], other[i])` over congruent snapshots.
    pub fn zip_apply(&mut self, other: &ModelParams<S>, f: impl Fn(S, S) -> S) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, &y) in a.weights.data_mut().iter_mut().zip(b.weights.data()) {
                *x = f(*x, y);
            }
            for (x, &y) in a.biases.iter_mut().zip(&b.biases) {
                *x = f(*x, y);
            }
        }
    }

    /// Largest absolute elementwise difference against a congruent snapshot.
    pub fn max_abs_diff(&self, other: &ModelParams<S>) -> S {
        let mut worst = S::zero();
        for (a, b) in self.layers.iter().zip(&other.layers) {
            let pairs = a
                .weights
                .data()
                .iter()
                .zip(b.weights.data())
                .chain(a.biases.iter().zip(&b.biases));
            for (&x, &y) in pairs {
                let d = (x - y).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

/// Builds a model from chained layer specs with seeded uniform Glorot
/// weights, `U(-sqrt(6/(in+out)), +sqrt(6/(in+out)))`, and zero biases.
///
/// Identical `(specs, seed)` inputs produce bitwise-identical models.
pub fn init_model<S: Scalar>(specs: &[LayerSpec], seed: u64) -> Result<MlpModel<S>> {
    if specs.is_empty() {
        return Err(Error::config("model needs at least one layer"));
    }
    for spec in specs {
        if spec.input_dim == 0 || spec.output_dim == 0 {
            return Err(Error::config("layer dimensions must be >= 1"));
        }
    }
    for pair in specs.windows(2) {
        if pair[0].output_dim != pair[1].input_dim {
            return Err(Error::config(format!(
                "layer output dim {} does not chain into next input dim {}",
                pair[0].output_dim, pair[1].input_dim
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = specs
        .iter()
        .map(|spec| {
            let bound = (6.0 / (spec.input_dim + spec.output_dim) as f64).sqrt();
            let data = (0..spec.output_dim * spec.input_dim)
                .map(|_| {
                    let u: f64 = rng.gen();
                    S::from_f64_lossy((2.0 * u - 1.0) * bound)
                })
                .collect();
            Layer {
                weights: Matrix::from_vec(spec.output_dim, spec.input_dim, data)
                    .expect("sized above"),
                biases: vec![S::zero(); spec.output_dim],
                activation: spec.activation,
            }
        })
        .collect();
    Ok(MlpModel { layers })
}

/// Runs the batch through the model, retaining per-layer intermediates.
pub fn forward<S: Scalar>(model: &MlpModel<S>, inputs: &Matrix<S>) -> Result<ForwardCache<S>> {
    if inputs.cols() != model.input_dim() {
        return Err(Error::shape(format!(
            "input width {} does not match model input dim {}",
            inputs.cols(),
            model.input_dim()
        )));
    }
    let mut pre_activations = Vec::with_capacity(model.layers.len());
    let mut activations = Vec::with_capacity(model.layers.len());
    let mut current = inputs.clone();
    for layer in &model.layers {
        let mut z = current.matmul_bt(&layer.weights)?;
        z.add_row_broadcast(&layer.biases);
        let mut a = z.clone();
        a.map_in_place(|v| layer.activation.apply(v));
        pre_activations.push(z);
        activations.push(a.clone());
        current = a;
    }
    Ok(ForwardCache {
        input: inputs.clone(),
        pre_activations,
        activations,
    })
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the
/// logits, `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<S: Scalar>(
    logits: &Matrix<S>,
    labels: &[usize],
) -> Result<(S, Matrix<S>)> {
    let batch = logits.rows();
    let classes = logits.cols();
    if labels.len() != batch {
        return Err(Error::Data(format!(
            "{} labels for a batch of {}",
            labels.len(),
            batch
        )));
    }
    if batch == 0 {
        return Err(Error::Data("empty batch".to_string()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let inv_batch = S::one() / S::from_f64_lossy(batch as f64);
    let mut d_logits = Matrix::zeros(batch, classes);
    let mut loss_sum = S::zero();
    for i in 0..batch {
        let row = logits.row(i);
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let mut exp_sum = S::zero();
        for &v in row {
            exp_sum = exp_sum + (v - max).exp();
        }
        let log_norm = max + exp_sum.ln();
        loss_sum = loss_sum + (log_norm - row[labels[i]]);
        let out = d_logits.row_mut(i);
        for (j, &v) in row.iter().enumerate() {
            let softmax = (v - log_norm).exp();
            let indicator = if j == labels[i] { S::one() } else { S::zero() };
            out[j] = (softmax - indicator) * inv_batch;
        }
    }
    Ok((loss_sum * inv_batch, d_logits))
}

/// Exact gradient of the (already batch-averaged) loss w.r.t. every
/// parameter, given the cache from `forward` and `dLoss/dLogits`.
pub fn backward<S: Scalar>(
    model: &MlpModel<S>,
    cache: &ForwardCache<S>,
    d_logits: &Matrix<S>,
) -> Result<GradientSet<S>> {
    if cache.activations.len() != model.layers.len() {
        return Err(Error::Internal(
            "forward cache does not match model depth".to_string(),
        ));
    }
    if !d_logits.same_shape(cache.logits()) {
        return Err(Error::Internal(
            "logit gradient does not match cached logits".to_string(),
        ));
    }
    let batch = cache.input.rows();
    let mut grads = model.to_params().zeros_like();
    let mut d_activated = d_logits.clone();
    for idx in (0..model.layers.len()).rev() {
        let layer = &model.layers[idx];
        // dZ = dA .* act'(z)
        let mut d_pre = d_activated;
        {
            let z = &cache.pre_activations[idx];
            for (d, &zv) in d_pre.data_mut().iter_mut().zip(z.data()) {
                *d = *d * layer.activation.derivative(zv);
            }
        }
        let below = if idx == 0 {
            &cache.input
        } else {
            &cache.activations[idx - 1]
        };
        grads.layers[idx].weights = d_pre.matmul_at(below)?;
        grads.layers[idx].biases = d_pre.column_sums();
        d_activated = d_pre.matmul(&model.layers[idx].weights)?;
    }
    Ok(GradientSet {
        values: grads,
        sample_count: batch,
    })
}

/// Argmax class per input row; ties break toward the lowest class index.
pub fn predict<S: Scalar>(model: &MlpModel<S>, inputs: &Matrix<S>) -> Result<Vec<usize>> {
    let cache = forward(model, inputs)?;
    let logits = cache.logits();
    let mut out = Vec::with_capacity(logits.rows());
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let mut best = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        out.push(best);
    }
    Ok(out)
}
