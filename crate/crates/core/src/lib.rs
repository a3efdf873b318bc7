//! Deterministic federated-learning simulator.
//!
//! The crate simulates a client/server federation training a dense
//! feed-forward network under five protocols: plain and weighted federated
//! averaging, cycle (sequential) learning, a server-coordinated
//! chunk-parallel protocol, and its relay-based semi-centralized variant.
//! Clients never expose raw data; only parameters, losses, and gradient
//! sums travel between nodes. A parametric simulated clock replaces
//! wall-clock timing so parallelism effects are hardware-independent and
//! every run is reproducible from a single master seed.
//!
//! Layering, bottom up:
//!
//! - [`nn`] — matrices, the MLP with exact backpropagation, optimizers,
//!   and parameter/gradient aggregation. Generic over the [`Scalar`] type.
//! - [`data`] — IDX-format and synthetic datasets plus the client
//!   partitioners (balanced/imbalanced x IID/non-IID).
//! - [`runtime`] — client/server nodes, typed messages, the simulated
//!   clock, and the event log.
//! - [`strategies`] — the five training protocols behind one
//!   [`strategies::Strategy`] interface, plus the chunk instruction
//!   generator.
//! - [`metrics`] — accuracy, confusion matrix, per-class precision/recall,
//!   macro F1.
//! - [`experiment`] — config parsing, the experiment grid runner, and
//!   plot-ready CSV emission used by the `fedsim` CLI.
//!
//! All simulation entry points operate on the `f64` aliases exported at
//! the crate root; the [`nn`] and [`data`] kernels stay generic so the
//! math can be instantiated at `f32` where memory matters more than the
//! tight oracle tolerances `f64` affords.

pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod runtime;
pub mod scalar;
pub mod strategies;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Row-major `f64` matrix used throughout the simulator.
pub type Matrix = nn::Matrix<f64>;
/// `f64` feed-forward network.
pub type MlpModel = nn::MlpModel<f64>;
/// `f64` flat parameter snapshot of an [`MlpModel`].
pub type ModelParams = nn::ModelParams<f64>;
/// `f64` gradient bundle with its covered sample count.
pub type GradientSet = nn::GradientSet<f64>;
/// `f64` Adam optimizer state.
pub type AdamState = nn::AdamState<f64>;
/// `f64` optimizer dispatch (Adam or plain SGD).
pub type Optimizer = nn::Optimizer<f64>;
/// `f64` labelled dataset.
pub type Dataset = data::Dataset<f64>;
/// One client's `f64` private shard.
pub type ClientShard = data::ClientShard<f64>;
