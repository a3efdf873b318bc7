//! Typed messages between federation nodes.
//!
//! The privacy firewall is structural: no payload variant has a field that
//! can hold feature rows or labels, so raw data cannot leave a client by
//! construction. Payloads carry model parameters, scalar losses, and
//! gradient sums only.

use crate::nn::serialize::{params_byte_len, write_params};
use crate::{GradientSet, ModelParams};

/// A federation participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Server,
    Client(usize),
}

impl Endpoint {
    pub(crate) fn label(&self) -> String {
        match self {
            Endpoint::Server => "server".to_string(),
            Endpoint::Client(id) => format!("client:{id}"),
        }
    }
}

/// Report a client sends after training one chunk: its loss, the gradient
/// sums over the chunk, and how many samples they cover.
#[derive(Debug, Clone)]
pub struct LossGradReport {
    pub client_id: usize,
    pub loss: f64,
    pub grads: GradientSet,
}

/// Message payloads. Parameter-bearing variants serialize through the
/// same binary layout as the on-disk snapshot format.
#[derive(Debug, Clone)]
pub enum MessagePayload {
    /// Server pushes the current global parameters.
    ModelBroadcast { params: ModelParams },
    /// Server instructs a client to cut its shard into scheduled chunks.
    TrainChunkCmd { client_id: usize, chunk_size: usize },
    /// Client returns loss and gradient sums for one chunk.
    LossGradReport(LossGradReport),
    /// Client returns a locally trained model, its shard size, and the
    /// training loss that produced it.
    LocalModelReport {
        client_id: usize,
        params: ModelParams,
        size: usize,
        loss: f64,
    },
    /// Client-to-client relay carrying the model plus the running
    /// loss/gradient accumulator of the current step.
    RelayModel {
        from: usize,
        to: usize,
        params: ModelParams,
        accumulated_loss: f64,
        accumulated_grads: Option<ModelParams>,
    },
}

impl MessagePayload {
    pub(crate) fn kind(&self) -> &'static str {
        match self {
            MessagePayload::ModelBroadcast { .. } => "model_broadcast",
            MessagePayload::TrainChunkCmd { .. } => "train_chunk_cmd",
            MessagePayload::LossGradReport(_) => "loss_grad_report",
            MessagePayload::LocalModelReport { .. } => "local_model_report",
            MessagePayload::RelayModel { .. } => "relay_model",
        }
    }

    pub(crate) fn loss(&self) -> Option<f64> {
        match self {
            MessagePayload::LossGradReport(report) => Some(report.loss),
            MessagePayload::LocalModelReport { loss, .. } => Some(*loss),
            MessagePayload::RelayModel {
                accumulated_loss, ..
            } => Some(*accumulated_loss),
            _ => None,
        }
    }

    /// Serialized size; computed without materializing the bytes.
    pub fn byte_len(&self) -> usize {
        match self {
            MessagePayload::ModelBroadcast { params } => 1 + params_byte_len(params),
            MessagePayload::TrainChunkCmd { .. } => 1 + 8 + 8,
            MessagePayload::LossGradReport(report) => {
                1 + 8 + 8 + 8 + params_byte_len(&report.grads.values)
            }
            MessagePayload::LocalModelReport { params, .. } => {
                1 + 8 + 8 + 8 + params_byte_len(params)
            }
            MessagePayload::RelayModel {
                params,
                accumulated_grads,
                ..
            } => {
                1 + 8
                    + 8
                    + 8
                    + params_byte_len(params)
                    + 1
                    + accumulated_grads.as_ref().map_or(0, params_byte_len)
            }
        }
    }

    /// Serializes the payload (tag byte, little-endian scalars, parameter
    /// blocks in the snapshot format). This is what the privacy check
    /// scans: whatever a message can emit on a wire is produced here.
    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        let start = out.len();
        match self {
            MessagePayload::ModelBroadcast { params } => {
                out.push(0);
                write_params(params, out);
            }
            MessagePayload::TrainChunkCmd {
                client_id,
                chunk_size,
            } => {
                out.push(1);
                out.extend_from_slice(&(*client_id as u64).to_le_bytes());
                out.extend_from_slice(&(*chunk_size as u64).to_le_bytes());
            }
            MessagePayload::LossGradReport(report) => {
                out.push(2);
                out.extend_from_slice(&(report.client_id as u64).to_le_bytes());
                out.extend_from_slice(&report.loss.to_le_bytes());
                out.extend_from_slice(&(report.grads.sample_count as u64).to_le_bytes());
                write_params(&report.grads.values, out);
            }
            MessagePayload::LocalModelReport {
                client_id,
                params,
                size,
                loss,
            } => {
                out.push(3);
                out.extend_from_slice(&(*client_id as u64).to_le_bytes());
                out.extend_from_slice(&(*size as u64).to_le_bytes());
                out.extend_from_slice(&loss.to_le_bytes());
                write_params(params, out);
            }
            MessagePayload::RelayModel {
                from,
                to,
                params,
                accumulated_loss,
                accumulated_grads,
            } => {
                out.push(4);
                out.extend_from_slice(&(*from as u64).to_le_bytes());
                out.extend_from_slice(&(*to as u64).to_le_bytes());
                out.extend_from_slice(&accumulated_loss.to_le_bytes());
                write_params(params, out);
                match accumulated_grads {
                    Some(grads) => {
                        out.push(1);
                        write_params(grads, out);
                    }
                    None => out.push(0),
                }
            }
        }
        debug_assert_eq!(out.len() - start, self.byte_len());
    }
}

/// An addressed message.
#[derive(Debug, Clone)]
pub struct Message {
    pub sender: Endpoint,
    pub receiver: Endpoint,
    pub payload: MessagePayload,
}

impl Message {
    pub fn new(sender: Endpoint, receiver: Endpoint, payload: MessagePayload) -> Self {
        Message {
            sender,
            receiver,
            payload,
        }
    }

    pub fn payload_bytes(&self) -> usize {
        self.payload.byte_len()
    }
}
