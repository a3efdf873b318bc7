//! Neural-network kernel: matrices, the MLP, optimizers, aggregation.
//!
//! Everything here is pure over value types and generic over [`crate::Scalar`];
//! the simulation layers instantiate it at `f64`.

mod aggregate;
mod matrix;
mod mlp;
mod optim;
pub mod serialize;

pub use aggregate::{average_gradients, average_params, GradientAccumulator};
pub use matrix::Matrix;
pub use mlp::{
    backward, forward, init_model, predict, softmax_cross_entropy, ActivationKind, ForwardCache,
    GradientSet, Layer, LayerSpec, MlpModel, ModelParams, ParamLayer,
};
pub use optim::{adam_step, sgd_step, AdamState, Optimizer, OptimizerKind};

#[cfg(test)]
mod gradient_check {
    //! Finite-difference oracle for the analytic gradients.

    use super::*;
    
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Mean cross-entropy loss as a pure function of flattened parameters.
    fn loss_at(model: &MlpModel<f64>, x: &Matrix<f64>, labels: &[usize]) -> f64 {
        let cache = forward(model, x).unwrap();
        let (loss, _) = softmax_cross_entropy(cache.logits(), labels).unwrap();
        loss
    }

    fn perturb(model: &MlpModel<f64>, flat_idx: usize, h: f64) -> MlpModel<f64> {
        let mut params = model.to_params();
        let mut seen = 0usize;
        for layer in &mut params.layers {
            let w_len = layer.weights.data().len();
            if flat_idx < seen + w_len {
                layer.weights.data_mut()[flat_idx - seen] += h;
                return MlpModel::from_params(params).unwrap();
            }
            seen += w_len;
            if flat_idx < seen + layer.biases.len() {
                layer.biases[flat_idx - seen] += h;
                return MlpModel::from_params(params).unwrap();
            }
            seen += layer.biases.len();
        }
        panic!("flat index out of range");
    }

    /// Central finite differences over every parameter of the model.
    pub(crate) fn numeric_gradient(
        model: &MlpModel<f64>,
        x: &Matrix<f64>,
        labels: &[usize],
        h: f64,
    ) -> Vec<f64> {
        (0..model.param_count())
            .map(|i| {
                let plus = loss_at(&perturb(model, i, h), x, labels);
                let minus = loss_at(&perturb(model, i, -h), x, labels);
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    pub(crate) fn analytic_gradient(
        model: &MlpModel<f64>,
        x: &Matrix<f64>,
        labels: &[usize],
    ) -> Vec<f64> {
        let cache = forward(model, x).unwrap();
        let (_, d) = softmax_cross_entropy(cache.logits(), labels).unwrap();
        let grads = backward(model, &cache, &d).unwrap();
        let mut flat = Vec::with_capacity(model.param_count());
        grads.values.for_each_entry(|v| flat.push(v));
        flat
    }

    pub(crate) fn random_case(seed: u64) -> (MlpModel<f64>, Matrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_dim = rng.gen_range(2..6);
        let hidden = rng.gen_range(2..8);
        let classes = rng.gen_range(2..5);
        let act = match rng.gen_range(0..2) {
            0 => ActivationKind::Relu,
            _ => ActivationKind::Tanh,
        };
        let specs = [
            LayerSpec::new(input_dim, hidden, act),
            LayerSpec::new(hidden, classes, ActivationKind::Identity),
        ];
        let model = init_model::<f64>(&specs, seed).unwrap();
        assert!(model.param_count() <= 1000);
        let batch = rng.gen_range(1..=8);
        let x = Matrix::from_vec(
            batch,
            input_dim,
            (0..batch * input_dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
        )
        .unwrap();
        let labels = (0..batch).map(|_| rng.gen_range(0..classes)).collect();
        (model, x, labels)
    }

    pub(crate) fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| (a - n).abs() / f64::max(a.abs().max(n.abs()), 1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for seed in 0..10 {
            let (model, x, labels) = random_case(seed);
            let analytic = analytic_gradient(&model, &x, &labels);
            let numeric = numeric_gradient(&model, &x, &labels, 1e-5);
            let err = max_relative_error(&analytic, &numeric);
            assert!(err < 1e-5, "seed {seed}: relative error {err}");
        }
    }
}
