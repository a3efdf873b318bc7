//! Server-side chunk scheduler for the chunk-parallel protocols.
//!
//! Given the clients' data volumes, a batch size, and a training window,
//! the generator plans which client trains which chunk at every step. The
//! chunk size is `batch_size / window`; clients are visited in descending
//! data volume (ties toward the lower id) and greedily drop one chunk into
//! each step, front to back, while the step has capacity and the client
//! has full chunks left. Remainder rows (`size mod chunk`) are flagged in
//! the per-client instruction vector but never scheduled, so one pass of
//! the schedule consumes exactly the full-chunk portion of every shard.

use serde::Serialize;

use crate::error::{Error, Result};

/// One scheduled unit of work: a client and which of its chunks to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduledChunk {
    pub client: usize,
    pub chunk_idx: usize,
}

/// Per-client instruction vector retained for audit: the chunk size the
/// client was told to cut, whether a remainder is left over, and a
/// participation flag per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientInstruction {
    pub client_id: usize,
    pub declared_chunk: usize,
    pub has_remainder: bool,
    pub step_flags: Vec<bool>,
}

/// Complete plan for one global iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub chunk_size: usize,
    /// Steps in execution order; members in assignment (generation) order.
    pub steps: Vec<Vec<ScheduledChunk>>,
    pub per_client: Vec<ClientInstruction>,
    pub warnings: Vec<String>,
}

impl Schedule {
    /// Total samples one pass consumes: `sum(size_i - size_i mod chunk)`.
    pub fn total_scheduled_samples(&self) -> usize {
        self.steps.iter().map(|s| s.len() * self.chunk_size).sum()
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// JSON export consumed by the CLI's schedule dump.
    pub fn to_json(&self, hosts: Option<&HostAssignment>) -> serde_json::Value {
        let mut value = serde_json::json!({
            "chunk_size": self.chunk_size,
            "steps": self.steps,
        });
        if let Some(hosts) = hosts {
            value["hosts"] = serde_json::json!(hosts.hosts);
        }
        value
    }
}

/// Which client performs the update step of each scheduled step in the
/// relay variant: the last contributor in generation order, i.e. the node
/// holding the complete loss/gradient accumulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostAssignment {
    pub hosts: Vec<usize>,
}

fn plan(sizes: &[usize], batch_size: usize, window: usize) -> Result<(Schedule, HostAssignment)> {
    if window == 0 {
        return Err(Error::config("window must be >= 1"));
    }
    if batch_size < window {
        return Err(Error::config(format!(
            "batch size {batch_size} smaller than window {window}"
        )));
    }
    if !batch_size.is_multiple_of(window) {
        return Err(Error::config(format!(
            "batch size {batch_size} is not divisible by window {window}"
        )));
    }
    let chunk = batch_size / window;

    let mut warnings = Vec::new();
    let full_chunk_total: usize = sizes.iter().map(|&d| d - d % chunk).sum();
    if full_chunk_total < batch_size {
        return Err(Error::config(format!(
            "full-chunk data ({full_chunk_total} rows at chunk {chunk}) cannot fill one batch of {batch_size}"
        )));
    }
    let nonempty = sizes.iter().filter(|&&d| d >= chunk).count();
    if nonempty < window {
        warnings.push(format!(
            "window {window} exceeds the {nonempty} clients holding a full chunk; steps will be underfilled"
        ));
    }

    // Descending data volume, ties toward the lower client id.
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(sizes[i]), i));

    let mut step_count = full_chunk_total.div_ceil(batch_size);
    let mut filled = vec![0usize; step_count];
    let mut steps: Vec<Vec<ScheduledChunk>> = vec![Vec::new(); step_count];
    let mut hosts: Vec<usize> = vec![usize::MAX; step_count];
    let mut instructions = Vec::with_capacity(order.len());

    for &client in &order {
        let size = sizes[client];
        let mut chunks_left = size / chunk;
        let mut step_flags = vec![false; step_count];
        let mut step = 0usize;
        while chunks_left > 0 {
            if step == step_count {
                // The dominant client outlasts the capacity estimate; add
                // a step so every full chunk still gets scheduled.
                step_count += 1;
                filled.push(0);
                steps.push(Vec::new());
                hosts.push(usize::MAX);
                step_flags.push(false);
            }
            // Fill levels are multiples of chunk, and chunk divides batch,
            // so "has room" always means "a whole chunk fits".
            if filled[step] < batch_size {
                let chunk_idx = (size / chunk) - chunks_left;
                steps[step].push(ScheduledChunk {
                    client,
                    chunk_idx,
                });
                hosts[step] = client;
                filled[step] += chunk;
                step_flags[step] = true;
                chunks_left -= 1;
            }
            step += 1;
        }
        instructions.push(ClientInstruction {
            client_id: client,
            declared_chunk: size.min(chunk),
            has_remainder: !size.is_multiple_of(chunk),
            step_flags,
        });
    }
    // Earlier clients may have shorter flag vectors than the grown plan.
    for ins in &mut instructions {
        ins.step_flags.resize(step_count, false);
    }

    debug_assert!(steps.iter().all(|s| s.len() * chunk <= batch_size));
    Ok((
        Schedule {
            chunk_size: chunk,
            steps,
            per_client: instructions,
            warnings,
        },
        HostAssignment { hosts },
    ))
}

/// Plans one iteration of the chunk-parallel protocol.
pub fn generate_instructions(
    sizes: &[usize],
    batch_size: usize,
    parallel_window: usize,
) -> Result<Schedule> {
    plan(sizes, batch_size, parallel_window).map(|(schedule, _)| schedule)
}

/// Plans one iteration of the relay variant and identifies each step's
/// host client.
pub fn generate_instructions_with_hosts(
    sizes: &[usize],
    batch_size: usize,
    cluster_window: usize,
) -> Result<(Schedule, HostAssignment)> {
    plan(sizes, batch_size, cluster_window)
}
