//! Server-coordinated chunk-parallel protocol (config kind `proposed`).
//!
//! Each step of the precomputed schedule broadcasts the global model to
//! the step's clients, which train one chunk each in parallel and return
//! loss/gradient reports. The server reduces the reports in the step's
//! listed order and applies one persistent optimizer update, so a full
//! step behaves exactly like one centralized mini-batch over the union of
//! its chunks. One pass of the schedule consumes every full chunk of
//! every shard once.

use crate::error::{Error, Result};
use crate::nn::GradientAccumulator;
use crate::runtime::{Endpoint, Message, MessagePayload, World};
use crate::strategies::schedule::{generate_instructions, Schedule};
use crate::strategies::{Strategy, StrategyConfig};

pub struct ChunkParallel {
    cfg: StrategyConfig,
    schedule: Option<Schedule>,
}

impl ChunkParallel {
    pub fn new(cfg: StrategyConfig) -> Self {
        ChunkParallel {
            cfg,
            schedule: None,
        }
    }

    /// Replays an externally supplied schedule (e.g. a dumped plan)
    /// instead of generating one at install time. The caller is
    /// responsible for the chunk layout on the clients.
    pub fn with_schedule(cfg: StrategyConfig, schedule: Schedule) -> Self {
        ChunkParallel {
            cfg,
            schedule: Some(schedule),
        }
    }
}

/// Installs a generated plan: applies the chunk layout to every client,
/// announces it with a `TrainChunkCmd`, and surfaces generator warnings
/// into the event log.
pub(crate) fn install_schedule(world: &mut World, schedule: &Schedule) {
    for client in &mut world.clients {
        client.install_chunks(schedule.chunk_size);
    }
    for _ in &schedule.warnings {
        world.warn(Endpoint::Server, Endpoint::Server);
    }
    let with_chunks: Vec<usize> = world
        .clients
        .iter()
        .filter(|c| c.full_chunk_count() > 0)
        .map(|c| c.id)
        .collect();
    for id in with_chunks {
        world.deliver(Message::new(
            Endpoint::Server,
            Endpoint::Client(id),
            MessagePayload::TrainChunkCmd {
                client_id: id,
                chunk_size: schedule.chunk_size,
            },
        ));
    }
}

/// Runs one scheduled step: broadcast, parallel chunk training, ordered
/// reduction, one optimizer update.
fn run_step(world: &mut World, schedule: &Schedule, step_idx: usize) -> Result<()> {
    let members = &schedule.steps[step_idx];
    if members.is_empty() {
        return Ok(());
    }
    let params = world.server.global_model.to_params();
    for member in members {
        world.deliver(Message::new(
            Endpoint::Server,
            Endpoint::Client(member.client),
            MessagePayload::ModelBroadcast {
                params: params.clone(),
            },
        ));
    }

    let mut durations = Vec::with_capacity(members.len());
    let mut reports = Vec::with_capacity(members.len());
    for member in members {
        let client = &mut world.clients[member.client];
        if client.cursor() != member.chunk_idx {
            return Err(Error::Scheduling(format!(
                "client {} is at chunk {} but step {} expects chunk {}",
                member.client,
                client.cursor(),
                step_idx,
                member.chunk_idx
            )));
        }
        let (report, duration) = client.train_chunk(&params, &world.clock.cost)?;
        durations.push(duration);
        reports.push(report);
    }
    world.clock.parallel_elapse(&durations);

    for report in &reports {
        world.deliver(Message::new(
            Endpoint::Client(report.client_id),
            Endpoint::Server,
            MessagePayload::LossGradReport(report.clone()),
        ));
    }

    let mut acc = GradientAccumulator::new(&params);
    for report in &reports {
        acc.push(&report.grads, report.loss)?;
    }
    let mean = acc.finish()?;
    world
        .clock
        .advance(world.clock.cost.aggregation_cost(params.entry_count()));
    world
        .server
        .optimizer
        .step(&mut world.server.global_model, &mean)?;
    Ok(())
}

impl Strategy for ChunkParallel {
    fn name(&self) -> &'static str {
        "proposed"
    }

    fn install(&mut self, world: &mut World) -> Result<()> {
        let sizes: Vec<usize> = world.clients.iter().map(|c| c.shard.size()).collect();
        let schedule =
            generate_instructions(&sizes, self.cfg.batch_size, self.cfg.parallel_window_size)?;
        install_schedule(world, &schedule);
        self.schedule = Some(schedule);
        Ok(())
    }

    fn run_iteration(&mut self, world: &mut World) -> Result<f64> {
        let start = world.clock.now();
        let schedule = self
            .schedule
            .clone()
            .ok_or_else(|| Error::Scheduling("strategy not installed".to_string()))?;
        let consumed_before = world.consumed_samples();
        for step_idx in 0..schedule.step_count() {
            run_step(world, &schedule, step_idx)?;
        }
        let consumed = world.consumed_samples() - consumed_before;
        if consumed != schedule.total_scheduled_samples() {
            return Err(Error::Internal(format!(
                "iteration consumed {consumed} samples but the schedule covers {}",
                schedule.total_scheduled_samples()
            )));
        }
        world.server.round += 1;
        Ok(world.clock.now() - start)
    }

    fn schedule(&self) -> Option<&Schedule> {
        self.schedule.as_ref()
    }
}
