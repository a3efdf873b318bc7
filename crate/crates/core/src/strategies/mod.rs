//! The five training protocols behind one strategy interface.
//!
//! A strategy runs one global iteration over a [`World`] — consuming every
//! client's scheduled data once — and reports the simulated duration; the
//! updated global model lives in `world.server.global_model`. Strategies
//! hold no federation state of their own beyond the precomputed schedule,
//! which is generated once at install time and reused every iteration
//! (shard sizes do not change mid-run).

mod chunk_parallel;
mod chunk_relay;
mod cycle;
mod fedavg;
mod local;
mod schedule;

pub use chunk_parallel::ChunkParallel;
pub use chunk_relay::ChunkRelay;
pub use cycle::CycleLearning;
pub use fedavg::FedAvg;
pub use schedule::{
    generate_instructions, generate_instructions_with_hosts, ClientInstruction, HostAssignment,
    Schedule, ScheduledChunk,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::OptimizerKind;
use crate::runtime::World;
use crate::MlpModel;

/// Protocol selector; the string forms are the config/CLI vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "wfedavg")]
    WFedAvg,
    #[serde(rename = "cycle")]
    Cycle,
    #[serde(rename = "proposed")]
    Proposed,
    #[serde(rename = "proposed_semi")]
    ProposedSemi,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::FedAvg => "fedavg",
            StrategyKind::WFedAvg => "wfedavg",
            StrategyKind::Cycle => "cycle",
            StrategyKind::Proposed => "proposed",
            StrategyKind::ProposedSemi => "proposed_semi",
        }
    }
}

/// Per-strategy hyperparameters.
///
/// `batch_size` and the window sizes drive the chunk protocols;
/// `local_epochs`/`local_batch_size` drive the full-shard protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub batch_size: usize,
    pub parallel_window_size: usize,
    pub cluster_window_size: usize,
    pub local_epochs: usize,
    pub local_batch_size: usize,
    pub iterations: usize,
    pub optimizer: OptimizerKind,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        StrategyConfig {
            kind,
            batch_size: 100,
            parallel_window_size: 2,
            cluster_window_size: 2,
            local_epochs: 1,
            local_batch_size: 32,
            iterations: 5,
            optimizer: OptimizerKind::Adam,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let window = match self.kind {
            StrategyKind::ProposedSemi => self.cluster_window_size,
            _ => self.parallel_window_size,
        };
        if window < 1 {
            return Err(Error::config("window size must be >= 1"));
        }
        if self.batch_size < window {
            return Err(Error::config(format!(
                "batch size {} must be >= window size {}",
                self.batch_size, window
            )));
        }
        if !self.batch_size.is_multiple_of(window) {
            return Err(Error::config(format!(
                "batch size {} is not divisible by window size {}",
                self.batch_size, window
            )));
        }
        if self.local_epochs < 1 || self.local_batch_size < 1 {
            return Err(Error::config("local epochs and batch size must be >= 1"));
        }
        Ok(())
    }
}

/// One global iteration of a training protocol.
pub trait Strategy {
    fn name(&self) -> &'static str;

    /// One-time setup before the first iteration (chunk layout, schedule
    /// generation, instruction messages). Default: nothing.
    fn install(&mut self, _world: &mut World) -> Result<()> {
        Ok(())
    }

    /// Runs a single global iteration; the updated global model is in
    /// `world.server.global_model`. Returns the simulated duration.
    fn run_iteration(&mut self, world: &mut World) -> Result<f64>;

    /// The precomputed chunk schedule, for audit dumps; `None` for the
    /// full-shard protocols.
    fn schedule(&self) -> Option<&Schedule> {
        None
    }

    /// JSON form of the schedule dump (`{chunk_size, steps, hosts?}`);
    /// the relay variant adds its host assignment.
    fn schedule_json(&self) -> Option<serde_json::Value> {
        self.schedule().map(|s| s.to_json(None))
    }
}

/// Builds the strategy named by the config.
pub fn build_strategy(cfg: &StrategyConfig) -> Result<Box<dyn Strategy>> {
    cfg.validate()?;
    Ok(match cfg.kind {
        StrategyKind::FedAvg => Box::new(FedAvg::new(*cfg, false)),
        StrategyKind::WFedAvg => Box::new(FedAvg::new(*cfg, true)),
        StrategyKind::Cycle => Box::new(CycleLearning::new(*cfg)),
        StrategyKind::Proposed => Box::new(ChunkParallel::new(*cfg)),
        StrategyKind::ProposedSemi => Box::new(ChunkRelay::new(*cfg)),
    })
}

/// Evaluation snapshot taken after each global iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord<E> {
    pub round: usize,
    pub sim_time: f64,
    pub duration: f64,
    pub evaluation: E,
}

/// Runs `iterations` global iterations, evaluating the model before
/// training and after every iteration; the series therefore has
/// `iterations + 1` entries. Cursors are reset between iterations so each
/// one re-consumes all scheduled data.
pub fn run_training<E>(
    strategy: &mut dyn Strategy,
    world: &mut World,
    iterations: usize,
    mut eval: impl FnMut(&MlpModel) -> Result<E>,
) -> Result<Vec<RoundRecord<E>>> {
    let mut series = Vec::with_capacity(iterations + 1);
    series.push(RoundRecord {
        round: 0,
        sim_time: world.clock.now(),
        duration: 0.0,
        evaluation: eval(&world.server.global_model)?,
    });
    strategy.install(world)?;
    for round in 1..=iterations {
        let duration = strategy.run_iteration(world)?;
        world.reset_cursors();
        series.push(RoundRecord {
            round,
            sim_time: world.clock.now(),
            duration,
            evaluation: eval(&world.server.global_model)?,
        });
    }
    Ok(series)
}

#[cfg(test)]
mod tests;
