//! Relay-based semi-centralized variant (config kind `proposed_semi`).
//!
//! Same schedule as the chunk-parallel protocol, but within a step the
//! model travels client to client: every member trains its chunk on the
//! step's incoming parameters and appends its loss and gradient sums to
//! the relayed accumulator. The step's host — the last contributor — owns
//! the complete accumulation, applies the optimizer update, and returns
//! the updated model to the server. Gradients are reduced through the
//! same accumulator in the same order as the parallel protocol, so both
//! produce bitwise-identical models; only the timing differs (sequential
//! sum instead of window maximum).

use crate::error::{Error, Result};
use crate::nn::GradientAccumulator;
use crate::runtime::{Endpoint, Message, MessagePayload, World};
use crate::strategies::chunk_parallel::install_schedule;
use crate::strategies::schedule::{generate_instructions_with_hosts, HostAssignment, Schedule};
use crate::strategies::{Strategy, StrategyConfig};

pub struct ChunkRelay {
    cfg: StrategyConfig,
    schedule: Option<Schedule>,
    hosts: Option<HostAssignment>,
}

impl ChunkRelay {
    pub fn new(cfg: StrategyConfig) -> Self {
        ChunkRelay {
            cfg,
            schedule: None,
            hosts: None,
        }
    }

    pub fn hosts(&self) -> Option<&HostAssignment> {
        self.hosts.as_ref()
    }
}

impl Strategy for ChunkRelay {
    fn name(&self) -> &'static str {
        "proposed_semi"
    }

    fn install(&mut self, world: &mut World) -> Result<()> {
        let sizes: Vec<usize> = world.clients.iter().map(|c| c.shard.size()).collect();
        let (schedule, hosts) = generate_instructions_with_hosts(
            &sizes,
            self.cfg.batch_size,
            self.cfg.cluster_window_size,
        )?;
        install_schedule(world, &schedule);
        self.schedule = Some(schedule);
        self.hosts = Some(hosts);
        Ok(())
    }

    fn run_iteration(&mut self, world: &mut World) -> Result<f64> {
        let start = world.clock.now();
        let schedule = self
            .schedule
            .clone()
            .ok_or_else(|| Error::Scheduling("strategy not installed".to_string()))?;
        let hosts = self
            .hosts
            .clone()
            .ok_or_else(|| Error::Scheduling("strategy not installed".to_string()))?;
        let consumed_before = world.consumed_samples();

        for (step_idx, members) in schedule.steps.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let host = hosts.hosts[step_idx];
            if members.last().map(|m| m.client) != Some(host) {
                return Err(Error::config(format!(
                    "host {host} of step {step_idx} is not the step's final client"
                )));
            }
            let params = world.server.global_model.to_params();
            world.deliver(Message::new(
                Endpoint::Server,
                Endpoint::Client(members[0].client),
                MessagePayload::ModelBroadcast {
                    params: params.clone(),
                },
            ));

            let mut acc = GradientAccumulator::new(&params);
            let mut raw_loss_sum = 0.0;
            for (pos, member) in members.iter().enumerate() {
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
                world.clock.parallel_elapse(&[duration]);
                raw_loss_sum += report.loss;
                acc.push(&report.grads, report.loss)?;
                if let Some(next) = members.get(pos + 1) {
                    world.deliver(Message::new(
                        Endpoint::Client(member.client),
                        Endpoint::Client(next.client),
                        MessagePayload::RelayModel {
                            from: member.client,
                            to: next.client,
                            params: params.clone(),
                            accumulated_loss: raw_loss_sum,
                            accumulated_grads: Some(acc.partial_sum().clone()),
                        },
                    ));
                }
            }

            let step_loss = acc.mean_loss();
            let mean = acc.finish()?;
            world
                .clock
                .advance(world.clock.cost.aggregation_cost(params.entry_count()));
            world
                .server
                .optimizer
                .step(&mut world.server.global_model, &mean)?;
            world.deliver(Message::new(
                Endpoint::Client(host),
                Endpoint::Server,
                MessagePayload::LocalModelReport {
                    client_id: host,
                    params: world.server.global_model.to_params(),
                    size: world.clients[host].shard.size(),
                    loss: step_loss,
                },
            ));
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

    fn schedule_json(&self) -> Option<serde_json::Value> {
        self.schedule
            .as_ref()
            .map(|s| s.to_json(self.hosts.as_ref()))
    }
}
