//! Federated averaging, plain and data-volume weighted.
//!
//! Every participating client trains a copy of the global model on its
//! full shard for a fixed number of local epochs (optimizer state
//! re-initialized locally each round), then the server replaces the global
//! model with the (weighted) mean of the returned parameters. The weighted
//! variant scales each client by its shard size.

use crate::error::Result;
use crate::nn::average_params;
use crate::runtime::{Endpoint, Message, MessagePayload, World};
use crate::strategies::local::train_on_shard;
use crate::strategies::{Strategy, StrategyConfig};
use crate::{MlpModel, Optimizer};

pub struct FedAvg {
    cfg: StrategyConfig,
    weighted: bool,
}

impl FedAvg {
    pub fn new(cfg: StrategyConfig, weighted: bool) -> Self {
        FedAvg { cfg, weighted }
    }
}

impl Strategy for FedAvg {
    fn name(&self) -> &'static str {
        if self.weighted {
            "wfedavg"
        } else {
            "fedavg"
        }
    }

    fn run_iteration(&mut self, world: &mut World) -> Result<f64> {
        let start = world.clock.now();
        let params = world.server.global_model.to_params();
        let (participants, empty): (Vec<usize>, Vec<usize>) = world
            .clients
            .iter()
            .map(|c| c.id)
            .partition(|&id| !world.clients[id].shard.is_empty());
        for id in empty {
            world.warn(Endpoint::Client(id), Endpoint::Server);
        }

        for &id in &participants {
            world.deliver(Message::new(
                Endpoint::Server,
                Endpoint::Client(id),
                MessagePayload::ModelBroadcast {
                    params: params.clone(),
                },
            ));
        }

        let mut durations = Vec::with_capacity(participants.len());
        let mut locals = Vec::with_capacity(participants.len());
        let mut losses = Vec::with_capacity(participants.len());
        let mut weights = Vec::with_capacity(participants.len());
        for &id in &participants {
            let mut model = MlpModel::from_params(params.clone())?;
            let mut optimizer = Optimizer::new(self.cfg.optimizer, &params);
            let shard = &world.clients[id].shard;
            let (duration, loss) = train_on_shard(
                &mut model,
                shard,
                self.cfg.local_epochs,
                self.cfg.local_batch_size,
                &mut optimizer,
                &world.clock.cost,
            )?;
            durations.push(duration);
            losses.push(loss);
            weights.push(if self.weighted { shard.size() as f64 } else { 1.0 });
            locals.push(model.to_params());
        }
        world.clock.parallel_elapse(&durations);

        for ((&id, local), &loss) in participants.iter().zip(&locals).zip(&losses) {
            world.deliver(Message::new(
                Endpoint::Client(id),
                Endpoint::Server,
                MessagePayload::LocalModelReport {
                    client_id: id,
                    params: local.clone(),
                    size: world.clients[id].shard.size(),
                    loss,
                },
            ));
        }

        let averaged = average_params(&locals, &weights)?;
        world
            .clock
            .advance(world.clock.cost.aggregation_cost(averaged.entry_count()));
        world.server.global_model.load_params(&averaged)?;
        world.server.round += 1;
        Ok(world.clock.now() - start)
    }
}
