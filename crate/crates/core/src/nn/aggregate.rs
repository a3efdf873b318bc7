//! Parameter and gradient aggregation.
//!
//! Both averages accumulate as a left fold in input order and divide once
//! at the end. Every caller that must agree bitwise (the server-side
//! reducer and the relay-chain accumulator) goes through the same
//! [`GradientAccumulator`], so there is exactly one summation order.

use crate::error::{Error, Result};
use crate::nn::mlp::{GradientSet, ModelParams};
use crate::scalar::Scalar;

/// Weighted elementwise mean of congruent parameter sets,
/// `sum(w_i * p_i) / sum(w_i)`, accumulated in input (client-index) order.
pub fn average_params<S: Scalar>(
    models: &[ModelParams<S>],
    weights: &[f64],
) -> Result<ModelParams<S>> {
    if models.is_empty() {
        return Err(Error::Aggregation("no models to average".to_string()));
    }
    if models.len() != weights.len() {
        return Err(Error::Aggregation(format!(
            "{} models but {} weights",
            models.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::Aggregation("weights must be finite and >= 0".to_string()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Aggregation("weights sum to zero".to_string()));
    }
    // Weights are normalized before accumulating so a lone (or dominant)
    // contributor passes through bitwise: its scale is exactly 1.0.
    let mut acc = models[0].zeros_like();
    for (params, &weight) in models.iter().zip(weights) {
        if !acc.same_shape(params) {
            return Err(Error::Aggregation(
                "parameter sets are not shape-congruent".to_string(),
            ));
        }
        let scale = S::from_f64_lossy(weight / total);
        acc.zip_apply(params, |a, p| a + scale * p);
    }
    Ok(acc)
}

/// Left-fold accumulator for sample-count-weighted gradient means.
#[derive(Debug, Clone)]
pub struct GradientAccumulator<S: Scalar> {
    sum: ModelParams<S>,
    total_samples: usize,
    loss_weighted_sum: f64,
}

impl<S: Scalar> GradientAccumulator<S> {
    pub fn new(shape: &ModelParams<S>) -> Self {
        GradientAccumulator {
            sum: shape.zeros_like(),
            total_samples: 0,
            loss_weighted_sum: 0.0,
        }
    }

    /// Folds in one report: `sum += g * count`.
    pub fn push(&mut self, grads: &GradientSet<S>, loss: f64) -> Result<()> {
        if !self.sum.same_shape(&grads.values) {
            return Err(Error::Aggregation(
                "gradient report is not shape-congruent".to_string(),
            ));
        }
        let count = S::from_f64_lossy(grads.sample_count as f64);
        self.sum.zip_apply(&grads.values, |s, g| s + g * count);
        self.total_samples += grads.sample_count;
        self.loss_weighted_sum += loss * grads.sample_count as f64;
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.total_samples
    }

    /// Sample-weighted mean loss over everything pushed so far.
    pub fn mean_loss(&self) -> f64 {
        if self.total_samples == 0 {
            0.0
        } else {
            self.loss_weighted_sum / self.total_samples as f64
        }
    }

    /// Running weighted gradient sum, exposed for relay payloads.
    pub fn partial_sum(&self) -> &ModelParams<S> {
        &self.sum
    }

    /// Divides once by the total sample count.
    pub fn finish(mut self) -> Result<GradientSet<S>> {
        if self.total_samples == 0 {
            return Err(Error::Aggregation("no gradient reports".to_string()));
        }
        let total = S::from_f64_lossy(self.total_samples as f64);
        self.sum.zip_apply(&self.sum.clone(), |s, _| s / total);
        Ok(GradientSet {
            values: self.sum,
            sample_count: self.total_samples,
        })
    }
}

/// Sample-count-weighted mean of gradient reports,
/// `sum(g_i * n_i) / sum(n_i)`, in input order.
///
/// Averaging the per-chunk gradients this way reproduces a single backward
/// pass over the union of the chunks.
pub fn average_gradients<S: Scalar>(reports: &[GradientSet<S>]) -> Result<GradientSet<S>> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Aggregation("no gradient reports".to_string()))?;
    let mut acc = GradientAccumulator::new(&first.values);
    for report in reports {
        acc.push(report, 0.0)?;
    }
    acc.finish()
}
