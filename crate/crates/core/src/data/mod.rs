//! Dataset loading, synthesis, and client partitioning.

mod dataset;
mod idx;
mod partition;

pub use dataset::{synth_blobs, Dataset};
pub use idx::{load_idx, write_idx};
pub use partition::{
    chunk_shard, partition, ClientShard, PartitionMode, PartitionSpec, ShardChunk, SizeProfile,
};
