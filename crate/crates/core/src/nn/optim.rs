//! SGD and Adam parameter updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::mlp::{GradientSet, MlpModel, ModelParams};
use crate::scalar::Scalar;

/// Adam moment estimates and hyperparameters.
///
/// Defaults follow the usual `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`
/// with a learning rate of `0.001`.
#[derive(Debug, Clone)]
pub struct AdamState<S: Scalar> {
    pub first_moment: ModelParams<S>,
    pub second_moment: ModelParams<S>,
    pub step_count: u64,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
    pub learning_rate: S,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(shape: &ModelParams<S>, learning_rate: f64) -> Self {
        AdamState {
            first_moment: shape.zeros_like(),
            second_moment: shape.zeros_like(),
            step_count: 0,
            beta1: S::from_f64_lossy(0.9),
            beta2: S::from_f64_lossy(0.999),
            epsilon: S::from_f64_lossy(1e-8),
            learning_rate: S::from_f64_lossy(learning_rate),
        }
    }
}

/// One Adam update with bias correction; increments `step_count` by one.
pub fn adam_step<S: Scalar>(
    model: &mut MlpModel<S>,
    grads: &GradientSet<S>,
    state: &mut AdamState<S>,
) -> Result<()> {
    let shape = model.to_params();
    if !shape.same_shape(&grads.values) || !shape.same_shape(&state.first_moment) {
        return Err(Error::shape(
            "gradients or optimizer state do not match model shape".to_string(),
        ));
    }
    state.step_count += 1;
    let one = S::one();
    let b1 = state.beta1;
    let b2 = state.beta2;
    state
        .first_moment
        .zip_apply(&grads.values, |m, g| b1 * m + (one - b1) * g);
    state
        .second_moment
        .zip_apply(&grads.values, |v, g| b2 * v + (one - b2) * g * g);
    let t = state.step_count as i32;
    let m_correction = one - b1.powi(t);
    let v_correction = one - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;
    // p -= lr * m_hat / (sqrt(v_hat) + eps), layer by layer in order.
    for (idx, layer) in model_layers_mut(model).iter_mut().enumerate() {
        let m_layer = &state.first_moment.layers[idx];
        let v_layer = &state.second_moment.layers[idx];
        for ((p, &m), &v) in layer
            .weights
            .data_mut()
            .iter_mut()
            .zip(m_layer.weights.data())
            .zip(v_layer.weights.data())
        {
            let m_hat = m / m_correction;
            let v_hat = v / v_correction;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
        for ((p, &m), &v) in layer
            .biases
            .iter_mut()
            .zip(&m_layer.biases)
            .zip(&v_layer.biases)
        {
            let m_hat = m / m_correction;
            let v_hat = v / v_correction;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Plain gradient step `p -= lr * g`.
pub fn sgd_step<S: Scalar>(
    model: &mut MlpModel<S>,
    grads: &GradientSet<S>,
    learning_rate: S,
) -> Result<()> {
    if !model.to_params().same_shape(&grads.values) {
        return Err(Error::shape(
            "gradients do not match model shape".to_string(),
        ));
    }
    for (idx, layer) in model_layers_mut(model).iter_mut().enumerate() {
        let g_layer = &grads.values.layers[idx];
        for (p, &g) in layer
            .weights
            .data_mut()
            .iter_mut()
            .zip(g_layer.weights.data())
        {
            *p = *p - learning_rate * g;
        }
        for (p, &g) in layer.biases.iter_mut().zip(&g_layer.biases) {
            *p = *p - learning_rate * g;
        }
    }
    Ok(())
}

fn model_layers_mut<S: Scalar>(model: &mut MlpModel<S>) -> &mut [crate::nn::mlp::Layer<S>] {
    // Layer internals stay crate-private; optimizers are the one writer.
    model.layers_mut()
}

/// Optimizer selection carried by strategy configs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd { learning_rate: f64 },
}

/// Stateful optimizer dispatch over a fixed model shape.
#[derive(Debug, Clone)]
pub enum Optimizer<S: Scalar> {
    Adam(AdamState<S>),
    Sgd { learning_rate: S },
}

impl<S: Scalar> Optimizer<S> {
    /// Fresh optimizer state for a model of the given shape.
    pub fn new(kind: OptimizerKind, shape: &ModelParams<S>) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(shape, 0.001)),
            OptimizerKind::Sgd { learning_rate } => Optimizer::Sgd {
                learning_rate: S::from_f64_lossy(learning_rate),
            },
        }
    }

    pub fn step(&mut self, model: &mut MlpModel<S>, grads: &GradientSet<S>) -> Result<()> {
        match self {
            Optimizer::Adam(state) => adam_step(model, grads, state),
            Optimizer::Sgd { learning_rate } => sgd_step(model, grads, *learning_rate),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{init_model, ActivationKind, LayerSpec};
    use crate::nn::Matrix;

    fn tiny_model() -> MlpModel<f64> {
        init_model(&[LayerSpec::new(2, 2, ActivationKind::Identity)], 3).unwrap()
    }

    fn grads_like(model: &MlpModel<f64>, fill: f64) -> GradientSet<f64> {
        let mut values = model.to_params().zeros_like();
        values.zip_apply(&values.clone(), |_, _| fill);
        GradientSet {
            values,
            sample_count: 1,
        }
    }

    #[test]
    fn sgd_identities_and_scalar_case() {
        let mut model = tiny_model();
        let before = model.to_params();
        let nonzero = grads_like(&model, 2.0);
        let zero = grads_like(&model, 0.0);
        sgd_step(&mut model, &nonzero, 0.0).unwrap();
        assert_eq!(model.to_params(), before);
        sgd_step(&mut model, &zero, 0.5).unwrap();
        assert_eq!(model.to_params(), before);

        // Scalar p=1, g=2, lr=0.1 -> 0.8.
        let mut scalar: MlpModel<f64> = MlpModel::from_params(ModelParams {
            layers: vec![crate::nn::mlp::ParamLayer {
                weights: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
                biases: vec![0.0],
                activation: ActivationKind::Identity,
            }],
        })
        .unwrap();
        let mut g = scalar.to_params().zeros_like();
        g.layers[0].weights.set(0, 0, 2.0);
        sgd_step(
            &mut scalar,
            &GradientSet {
                values: g,
                sample_count: 1,
            },
            0.1,
        )
        .unwrap();
        assert!((scalar.to_params().layers[0].weights.get(0, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_only_bumps_step_count() {
        let mut model = tiny_model();
        let before = model.to_params();
        let mut state = AdamState::new(&before, 0.001);
        let zero = grads_like(&model, 0.0);
        adam_step(&mut model, &zero, &mut state).unwrap();
        assert_eq!(model.to_params(), before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr_sign() {
        let mut model = tiny_model();
        let before = model.to_params();
        let mut state = AdamState::new(&before, 0.001);
        let grads = grads_like(&model, 0.7);
        adam_step(&mut model, &grads, &mut state).unwrap();
        let after = model.to_params();
        // First bias-corrected step is -lr * g / (|g| + eps') ~ -lr * sign(g).
        let mut idx = 0;
        let mut befores = Vec::new();
        before.for_each_entry(|v| befores.push(v));
        after.for_each_entry(|v| {
            let delta = v - befores[idx];
            assert!((delta + 0.001).abs() < 1e-6, "delta {delta}");
            idx += 1;
        });
    }

    #[test]
    fn adam_three_steps_match_hand_recurrence() {
        // Scalar parameter, g = 1 each step; fold the recurrence independently.
        let params = ModelParams {
            layers: vec![crate::nn::mlp::ParamLayer {
                weights: Matrix::from_vec(1, 1, vec![0.5]).unwrap(),
                biases: vec![],
                activation: ActivationKind::Identity,
            }],
        };
        let mut model = MlpModel::from_params(params.clone()).unwrap();
        let mut state = AdamState::new(&params, 0.001);
        let mut g = params.zeros_like();
        g.layers[0].weights.set(0, 0, 1.0);
        let grads = GradientSet {
            values: g,
            sample_count: 1,
        };
        let (mut m, mut v, mut p) = (0.0f64, 0.0f64, 0.5f64);
        for t in 1..=3 {
            adam_step(&mut model, &grads, &mut state).unwrap();
            m = 0.9 * m + 0.1 * 1.0;
            v = 0.999 * v + 0.001 * 1.0;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            p -= 0.001 * m_hat / (v_hat.sqrt() + 1e-8);
            let got = model.to_params().layers[0].weights.get(0, 0);
            assert!((got - p).abs() < 1e-12, "step {t}: {got} vs {p}");
        }
        assert_eq!(state.step_count, 3);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut model = tiny_model();
        let other: MlpModel<f64> =
            init_model(&[LayerSpec::new(3, 2, ActivationKind::Identity)], 0).unwrap();
        let grads = GradientSet {
            values: other.to_params().zeros_like(),
            sample_count: 1,
        };
        assert!(sgd_step(&mut model, &grads, 0.1).is_err());
        let mut state = AdamState::new(&model.to_params(), 0.001);
        assert!(adam_step(&mut model, &grads, &mut state).is_err());
    }
}
