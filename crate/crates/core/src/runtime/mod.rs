//! Simulated federation world: nodes, messages, clock, event log.

mod clock;
mod log;
mod message;
mod node;

pub use clock::{CostModel, SimClock};
pub use log::{Event, EventLog};
pub use message::{Endpoint, LossGradReport, Message, MessagePayload};
pub use node::{ClientNode, ReshufflePolicy, ServerNode, World};
