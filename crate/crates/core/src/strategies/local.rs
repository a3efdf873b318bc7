//! Local mini-batch training shared by the averaging and cycle protocols.

use crate::error::Result;
use crate::nn::{backward, forward, softmax_cross_entropy};
use crate::runtime::CostModel;
use crate::{ClientShard, MlpModel, Optimizer};

/// Trains `model` in place for `epochs` passes of contiguous mini-batches
/// over the shard (trailing partial batch included). Returns the simulated
/// duration of the work and the mean training loss of the final epoch.
pub(crate) fn train_on_shard(
    model: &mut MlpModel,
    shard: &ClientShard,
    epochs: usize,
    batch_size: usize,
    optimizer: &mut Optimizer,
    cost: &CostModel,
) -> Result<(f64, f64)> {
    let m = shard.size();
    let batch = batch_size.max(1).min(m);
    let mut duration = 0.0;
    let mut epoch_loss = 0.0;
    for _ in 0..epochs {
        epoch_loss = 0.0;
        let mut start = 0;
        while start < m {
            let end = (start + batch).min(m);
            let inputs = shard.features.slice_rows(start, end);
            let labels = &shard.labels[start..end];
            let cache = forward(model, &inputs)?;
            let (loss, d_logits) = softmax_cross_entropy(cache.logits(), labels)?;
            let grads = backward(model, &cache, &d_logits)?;
            optimizer.step(model, &grads)?;
            duration += cost.train_cost(end - start);
            epoch_loss += loss * (end - start) as f64;
            start = end;
        }
    }
    Ok((duration, epoch_loss / m as f64))
}
