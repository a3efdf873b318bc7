//! Client and server nodes plus the world that orchestrates them.
//!
//! Orchestration is logically parallel but executes deterministically in a
//! single thread: within a training window clients are visited in the
//! step's listed order and their reports are reduced in that same order,
//! while the clock charges parallel work at the window maximum. The chunk
//! training path is pure over disjoint client state, so a parallel
//! executor could run it concurrently without changing any result as long
//! as reduction order is re-imposed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{chunk_shard, ShardChunk};
use crate::error::{Error, Result};
use crate::nn::{backward, forward, softmax_cross_entropy};
use crate::runtime::clock::{CostModel, SimClock};
use crate::runtime::log::EventLog;
use crate::runtime::message::{Endpoint, LossGradReport, Message};
use crate::{ClientShard, MlpModel, ModelParams, Optimizer};

/// One simulated client: its private shard, the chunk layout the server
/// instructed, and a cursor over the not-yet-consumed chunks.
#[derive(Debug)]
pub struct ClientNode {
    pub id: usize,
    pub shard: ClientShard,
    /// Full chunks only, in consumption order.
    chunks: Vec<ShardChunk>,
    /// Trailing partial chunk; flagged to the scheduler but never trained.
    remainder: Option<ShardChunk>,
    cursor: usize,
    scratch_model: Option<MlpModel>,
}

impl ClientNode {
    pub fn new(shard: ClientShard) -> Self {
        ClientNode {
            id: shard.client_id,
            shard,
            chunks: Vec::new(),
            remainder: None,
            cursor: 0,
            scratch_model: None,
        }
    }

    /// Applies the server's chunking instruction to the local shard.
    pub fn install_chunks(&mut self, chunk_size: usize) {
        let mut all = chunk_shard(&self.shard, chunk_size);
        self.remainder = match all.last() {
            Some(chunk) if chunk.is_remainder => all.pop(),
            _ => None,
        };
        self.chunks = all;
        self.cursor = 0;
    }

    pub fn full_chunk_count(&self) -> usize {
        self.chunks.len()
    }

    pub fn has_remainder(&self) -> bool {
        self.remainder.is_some()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Trains the next unused chunk on the given parameters: forward,
    /// loss, backward; the cursor advances by one. Raw rows never leave
    /// this method — the report carries loss and gradient sums only.
    ///
    /// Returns the report and the simulated duration of the local work.
    pub fn train_chunk(
        &mut self,
        params: &ModelParams,
        cost: &CostModel,
    ) -> Result<(LossGradReport, f64)> {
        let chunk = *self.chunks.get(self.cursor).ok_or_else(|| {
            Error::Scheduling(format!(
                "client {} has no unused chunk (cursor {} of {})",
                self.id,
                self.cursor,
                self.chunks.len()
            ))
        })?;
        self.cursor += 1;

        let model = match &mut self.scratch_model {
            Some(model) if model.to_params().same_shape(params) => {
                model.load_params(params)?;
                model
            }
            slot => {
                *slot = Some(MlpModel::from_params(params.clone())?);
                slot.as_mut().expect("just set")
            }
        };
        let inputs = self.shard.features.slice_rows(chunk.start, chunk.start + chunk.len);
        let labels = &self.shard.labels[chunk.start..chunk.start + chunk.len];
        let cache = forward(model, &inputs)?;
        let (loss, d_logits) = softmax_cross_entropy(cache.logits(), labels)?;
        let grads = backward(model, &cache, &d_logits)?;
        let duration = cost.train_cost(chunk.len);
        Ok((
            LossGradReport {
                client_id: self.id,
                loss,
                grads,
            },
            duration,
        ))
    }
}

/// The coordinating server: global model, its persistent optimizer state,
/// and the global iteration counter.
#[derive(Debug)]
pub struct ServerNode {
    pub global_model: MlpModel,
    pub optimizer: Optimizer,
    pub round: u64,
}

/// Whether `reset_cursors` also re-permutes each client's full chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReshufflePolicy {
    Off,
    /// Permutation seeded from `(base_seed, round, client id)`, so any
    /// iteration's order can be reproduced in isolation.
    Seeded(u64),
}

/// Complete simulation state for one training run.
pub struct World {
    pub server: ServerNode,
    pub clients: Vec<ClientNode>,
    pub clock: SimClock,
    pub log: EventLog,
    pub reshuffle: ReshufflePolicy,
}

impl World {
    /// Shard ids must be exactly `0..n`; clients are stored so that
    /// `clients[id].id == id`, which the strategies index by.
    pub fn new(model: MlpModel, optimizer: Optimizer, mut shards: Vec<ClientShard>, cost: CostModel) -> Self {
        shards.sort_by_key(|s| s.client_id);
        for (idx, shard) in shards.iter().enumerate() {
            assert_eq!(shard.client_id, idx, "client ids must be contiguous from 0");
        }
        World {
            server: ServerNode {
                global_model: model,
                optimizer,
                round: 0,
            },
            clients: shards.into_iter().map(ClientNode::new).collect(),
            clock: SimClock::new(cost),
            log: EventLog::new(),
            reshuffle: ReshufflePolicy::Off,
        }
    }

    pub fn capture_payloads(&mut self) {
        self.log = EventLog::with_payload_capture();
    }

    /// Delivers a message over the lossless FIFO channel: the clock
    /// advances by the transmission cost and the event is logged.
    pub fn deliver(&mut self, msg: Message) {
        let dt = self.clock.cost.message_cost(msg.payload_bytes());
        self.clock.advance(dt);
        self.log.record_message(self.clock.now(), &msg);
    }

    pub fn warn(&mut self, from: Endpoint, to: Endpoint) {
        self.log
            .record_warning(self.clock.now(), from.label(), to.label());
    }

    /// Zeroes every client's chunk cursor; under a seeded policy the full
    /// chunks are also re-permuted (the remainder chunk stays put).
    pub fn reset_cursors(&mut self) {
        for client in &mut self.clients {
            client.cursor = 0;
            if let ReshufflePolicy::Seeded(base) = self.reshuffle {
                let salt = base
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .wrapping_add(self.server.round)
                    .wrapping_mul(0x2545_F491_4F6C_DD1D)
                    .wrapping_add(client.id as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(salt);
                client.chunks.shuffle(&mut rng);
            }
        }
    }

    /// Total samples consumed so far this iteration, for conservation checks.
    pub fn consumed_samples(&self) -> usize {
        self.clients
            .iter()
            .map(|c| c.chunks[..c.cursor].iter().map(|ch| ch.len).sum::<usize>())
            .sum()
    }
}
