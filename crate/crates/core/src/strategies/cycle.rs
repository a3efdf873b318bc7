//! Cycle (sequential) learning: one model visits every client in turn.
//!
//! The model is relayed client to client in ascending id; each visit
//! trains the received model on the full local shard before passing it
//! on. There is no parallelism, so the simulated duration is the sum of
//! the visits plus the relay messages.

use crate::error::Result;
use crate::runtime::{Endpoint, Message, MessagePayload, World};
use crate::strategies::local::train_on_shard;
use crate::strategies::{Strategy, StrategyConfig};
use crate::{MlpModel, Optimizer};

pub struct CycleLearning {
    cfg: StrategyConfig,
}

impl CycleLearning {
    pub fn new(cfg: StrategyConfig) -> Self {
        CycleLearning { cfg }
    }
}

impl Strategy for CycleLearning {
    fn name(&self) -> &'static str {
        "cycle"
    }

    fn run_iteration(&mut self, world: &mut World) -> Result<f64> {
        let start = world.clock.now();
        let (participants, empty): (Vec<usize>, Vec<usize>) = world
            .clients
            .iter()
            .map(|c| c.id)
            .partition(|&id| !world.clients[id].shard.is_empty());
        for id in empty {
            world.warn(Endpoint::Client(id), Endpoint::Server);
        }

        let mut current = world.server.global_model.to_params();
        let mut previous: Option<usize> = None;
        let mut last_loss = 0.0;
        for &id in &participants {
            let msg = match previous {
                None => Message::new(
                    Endpoint::Server,
                    Endpoint::Client(id),
                    MessagePayload::ModelBroadcast {
                        params: current.clone(),
                    },
                ),
                Some(prev) => Message::new(
                    Endpoint::Client(prev),
                    Endpoint::Client(id),
                    MessagePayload::RelayModel {
                        from: prev,
                        to: id,
                        params: current.clone(),
                        accumulated_loss: 0.0,
                        accumulated_grads: None,
                    },
                ),
            };
            world.deliver(msg);

            let mut model = MlpModel::from_params(current)?;
            let mut optimizer = Optimizer::new(self.cfg.optimizer, &model.to_params());
            let (duration, loss) = train_on_shard(
                &mut model,
                &world.clients[id].shard,
                self.cfg.local_epochs,
                self.cfg.local_batch_size,
                &mut optimizer,
                &world.clock.cost,
            )?;
            world.clock.parallel_elapse(&[duration]);
            current = model.to_params();
            previous = Some(id);
            last_loss = loss;
        }

        if let Some(last) = previous {
            world.deliver(Message::new(
                Endpoint::Client(last),
                Endpoint::Server,
                MessagePayload::LocalModelReport {
                    client_id: last,
                    params: current.clone(),
                    size: world.clients[last].shard.size(),
                    loss: last_loss,
                },
            ));
        }
        world.server.global_model.load_params(&current)?;
        world.server.round += 1;
        Ok(world.clock.now() - start)
    }
}
