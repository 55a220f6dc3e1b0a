//! Replicas driven by local operations and broadcast deliveries.
//!
//! Every replica is a single-owner state machine with three entry points:
//! a local update (returning the envelope to broadcast), a local query,
//! and the delivery of an envelope. The sender's own envelope must be
//! delivered back to it before its next action; the simulator does this.

mod generic;
mod lww;
mod orset;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adt::{AdtError, Operation, QueryInput, Value};
use crate::history::Pid;

pub use generic::GenericReplica;
pub use lww::LwwMemoryReplica;
pub use orset::{OrSetReplica, Tag};

/// Lamport timestamp, ordered by clock then process id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub clock: u64,
    pub pid: Pid,
}

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp { clock: 0, pid: Pid(0) };

    pub fn new(clock: u64, pid: u32) -> Self {
        Timestamp { clock, pid: Pid(pid) }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.clock, self.pid.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    /// A timestamped update, for the generic and memory replicas.
    Stamped { ts: Timestamp, op: Operation },
    /// An insertion with its unique tag.
    OrInsert { value: Value, tag: Tag },
    /// A deletion of the tags the sender observed for `value`.
    OrDelete { value: Value, tags: Vec<Tag> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub sender: Pid,
    /// Sequence number of this broadcast among the sender's broadcasts.
    pub broadcast_id: u64,
    pub payload: Payload,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplicaError {
    #[error(transparent)]
    Adt(#[from] AdtError),
    #[error("{replica} replica cannot handle `{what}`")]
    Unsupported { replica: &'static str, what: String },
}

pub trait Replica: fmt::Debug + Send {
    fn pid(&self) -> Pid;

    /// Applies a local update and returns the envelope to broadcast,
    /// including to the sender itself.
    fn update(&mut self, op: &Operation) -> Result<Envelope, ReplicaError>;

    fn query(&mut self, q: &QueryInput) -> Result<Value, ReplicaError>;

    fn deliver(&mut self, env: &Envelope) -> Result<(), ReplicaError>;

    /// The abstract state currently observed by queries.
    fn state(&self) -> Value;
}

fn unsupported(replica: &'static str, what: impl ToString) -> ReplicaError {
    ReplicaError::Unsupported {
        replica,
        what: what.to_string(),
    }
}
