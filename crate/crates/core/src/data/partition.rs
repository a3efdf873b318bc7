//! Client partitioners for the balanced/imbalanced x IID/non-IID settings.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// How the target shard sizes are drawn.
///
/// `PaperRatio` cycles the proportions 4:2:1:1 over the clients (the
/// canonical 400-row, 4-client split is 200/100/50/50); `PowerLaw` weights
/// client `i` by `(i + 1)^-alpha` for heavier skew stress tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeProfile {
    Equal,
    PaperRatio,
    PowerLaw { alpha: f64 },
}

/// Distribution mode of a partitioning run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    BalancedIid,
    ImbalancedIid,
    ImbalancedNoniid,
}

impl PartitionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PartitionMode::BalancedIid => "balanced_iid",
            PartitionMode::ImbalancedIid => "imbalanced_iid",
            PartitionMode::ImbalancedNoniid => "imbalanced_noniid",
        }
    }
}

/// Full description of one partitioning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub mode: PartitionMode,
    pub n_clients: usize,
    /// Distinct labels per client; only meaningful for the non-IID mode.
    pub labels_per_client: usize,
    pub size_profile: SizeProfile,
    pub seed: u64,
}

/// One client's private slice of the parent dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard<S: Scalar> {
    pub client_id: usize,
    pub features: Matrix<S>,
    pub labels: Vec<usize>,
    /// Row indices into the parent dataset, kept for audit only.
    pub source_rows: Vec<usize>,
}

impl<S: Scalar> ClientShard<S> {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }

    pub fn distinct_labels(&self) -> Vec<usize> {
        let mut labels = self.labels.clone();
        labels.sort_unstable();
        labels.dedup();
        labels
    }
}

fn profile_weights(profile: SizeProfile, n_clients: usize) -> Vec<f64> {
    match profile {
        SizeProfile::Equal => vec![1.0; n_clients],
        SizeProfile::PaperRatio => {
            const CYCLE: [f64; 4] = [4.0, 2.0, 1.0, 1.0];
            (0..n_clients).map(|i| CYCLE[i % CYCLE.len()]).collect()
        }
        SizeProfile::PowerLaw { alpha } => {
            (0..n_clients).map(|i| ((i + 1) as f64).powf(-alpha)).collect()
        }
    }
}

/// Floor-allocated target sizes for `total` rows; errors if any client
/// would come out empty.
fn profile_sizes(total: usize, n_clients: usize, profile: SizeProfile) -> Result<Vec<usize>> {
    let weights = profile_weights(profile, n_clients);
    let sum: f64 = weights.iter().sum();
    let sizes: Vec<usize> = weights
        .iter()
        .map(|w| ((total as f64) * w / sum).floor() as usize)
        .collect();
    if let Some(idx) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Partition(format!(
            "size profile {profile:?} over {total} rows leaves client {idx} empty; \
             reduce n_clients or provide more data"
        )));
    }
    Ok(sizes)
}

fn shard_from_rows<S: Scalar>(ds: &Dataset<S>, client_id: usize, rows: Vec<usize>) -> ClientShard<S> {
    let (features, labels) = ds.gather(&rows);
    ClientShard {
        client_id,
        features,
        labels,
        source_rows: rows,
    }
}

/// Splits the dataset into per-client shards.
///
/// - `balanced_iid`: seeded global shuffle, then equal split (up to
///   `n_clients - 1` trailing rows dropped).
/// - `imbalanced_iid`: seeded shuffle, then contiguous slices sized by the
///   profile.
/// - `imbalanced_noniid`: rows are pooled by label (pool order seeded);
///   each client is assigned exactly `labels_per_client` distinct labels
///   round-robin and receives a contiguous slice of each pool, sized by
///   the profile with the pool's last consumer absorbing the remainder.
///   When `n_clients * labels_per_client < num_classes` the surplus label
///   pools have no consumer and are left out entirely; rows of consumed
///   labels are never dropped.
///
/// Shards are pairwise disjoint and the result is bytewise deterministic
/// per `(dataset, spec)`.
pub fn partition<S: Scalar>(ds: &Dataset<S>, spec: &PartitionSpec) -> Result<Vec<ClientShard<S>>> {
    if spec.n_clients == 0 {
        return Err(Error::Partition("n_clients must be >= 1".to_string()));
    }
    if ds.len() < spec.n_clients {
        return Err(Error::Partition(format!(
            "{} rows cannot cover {} clients",
            ds.len(),
            spec.n_clients
        )));
    }
    if spec.mode == PartitionMode::BalancedIid && spec.size_profile != SizeProfile::Equal {
        return Err(Error::Partition(
            "balanced_iid requires the equal size profile".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.mode {
        PartitionMode::BalancedIid => {
            let mut rows: Vec<usize> = (0..ds.len()).collect();
            rows.shuffle(&mut rng);
            let per = ds.len() / spec.n_clients;
            Ok((0..spec.n_clients)
                .map(|c| shard_from_rows(ds, c, rows[c * per..(c + 1) * per].to_vec()))
                .collect())
        }
        PartitionMode::ImbalancedIid => {
            let mut rows: Vec<usize> = (0..ds.len()).collect();
            rows.shuffle(&mut rng);
            let sizes = profile_sizes(ds.len(), spec.n_clients, spec.size_profile)?;
            let mut start = 0usize;
            Ok(sizes
                .iter()
                .enumerate()
                .map(|(c, &size)| {
                    let shard = shard_from_rows(ds, c, rows[start..start + size].to_vec());
                    start += size;
                    shard
                })
                .collect())
        }
        PartitionMode::ImbalancedNoniid => partition_noniid(ds, spec, &mut rng),
    }
}

fn partition_noniid<S: Scalar>(
    ds: &Dataset<S>,
    spec: &PartitionSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ClientShard<S>>> {
    let labels_per_client = spec.labels_per_client;
    if labels_per_client == 0 {
        return Err(Error::Partition("labels_per_client must be >= 1".to_string()));
    }
    if labels_per_client > ds.num_classes {
        return Err(Error::Partition(format!(
            "labels_per_client {} exceeds the {} available classes",
            labels_per_client, ds.num_classes
        )));
    }

    // Label pools in seeded order.
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes];
    for (row, &label) in ds.labels.iter().enumerate() {
        pools[label].push(row);
    }
    for pool in &mut pools {
        pool.shuffle(rng);
    }

    // Round-robin label assignment: client k, slot j -> (k * L + j) mod C.
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes];
    let mut assigned: Vec<Vec<usize>> = Vec::with_capacity(spec.n_clients);
    for client in 0..spec.n_clients {
        let slots: Vec<usize> = (0..labels_per_client)
            .map(|slot| (client * labels_per_client + slot) % ds.num_classes)
            .collect();
        for &label in &slots {
            users[label].push(client);
        }
        assigned.push(slots);
    }
    for (label, consumers) in users.iter().enumerate() {
        if !consumers.is_empty() && pools[label].len() < consumers.len() {
            return Err(Error::Partition(format!(
                "label {label} has {} rows but {} clients need a slice of it",
                pools[label].len(),
                consumers.len()
            )));
        }
    }

    let targets = profile_sizes(ds.len(), spec.n_clients, spec.size_profile)?;
    // Quota of a client within a pool: its target split evenly over its labels.
    let quota = |client: usize| targets[client] as f64 / labels_per_client as f64;

    // Carve each pool into contiguous slices; the last consumer absorbs the
    // remainder so no rows are dropped in this mode.
    let mut pool_cuts: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); ds.num_classes];
    for (label, consumers) in users.iter().enumerate() {
        if consumers.is_empty() {
            continue;
        }
        let pool_len = pools[label].len();
        let total_quota: f64 = consumers.iter().map(|&c| quota(c)).sum();
        let mut cursor = 0usize;
        for (pos, &client) in consumers.iter().enumerate() {
            let remaining_consumers = consumers.len() - pos - 1;
            let take = if pos + 1 == consumers.len() {
                pool_len - cursor
            } else {
                let raw = (pool_len as f64 * quota(client) / total_quota).floor() as usize;
                // Keep at least one row for this client and each later one.
                raw.max(1).min(pool_len - cursor - remaining_consumers)
            };
            pool_cuts[label].push((client, cursor, take));
            cursor += take;
        }
    }
    // Materialize shards in client order, visiting the client's labels in
    // slot order so the row layout is reproducible.
    let mut shards = Vec::with_capacity(spec.n_clients);
    for (client, slots) in assigned.iter().enumerate() {
        let mut rows = Vec::new();
        for &label in slots {
            for &(owner, start, len) in &pool_cuts[label] {
                if owner == client {
                    rows.extend_from_slice(&pools[label][start..start + len]);
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::Partition(format!(
                "client {client} received no rows; constraints are unsatisfiable"
            )));
        }
        shards.push(shard_from_rows(ds, client, rows));
    }
    Ok(shards)
}

/// A contiguous slice of a shard used as one unit of scheduled work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardChunk {
    pub start: usize,
    pub len: usize,
    /// True for the trailing partial chunk; the scheduler never assigns it.
    pub is_remainder: bool,
}

/// Splits a shard into `floor(size / chunk_size)` full chunks in shard
/// order, plus one flagged remainder chunk when the division is inexact.
pub fn chunk_shard<S: Scalar>(shard: &ClientShard<S>, chunk_size: usize) -> Vec<ShardChunk> {
    assert!(chunk_size >= 1, "chunk_size must be >= 1");
    let full = shard.size() / chunk_size;
    let mut chunks: Vec<ShardChunk> = (0..full)
        .map(|i| ShardChunk {
            start: i * chunk_size,
            len: chunk_size,
            is_remainder: false,
        })
        .collect();
    let rem = shard.size() % chunk_size;
    if rem > 0 {
        chunks.push(ShardChunk {
            start: full * chunk_size,
            len: rem,
            is_remainder: true,
        });
    }
    chunks
}
