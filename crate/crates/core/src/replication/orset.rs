use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::adt::{Operation, QueryInput, Value};
use crate::history::Pid;

use super::{unsupported, Envelope, Payload, Replica, ReplicaError};

/// Unique insertion tag: the inserting process and its insertion count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tag {
    pub pid: Pid,
    pub counter: u64,
}

/// Observed-remove set: a deletion only removes the insertions its issuer
/// had seen, so an insertion concurrent with a deletion survives.
#[derive(Debug)]
pub struct OrSetReplica {
    pid: Pid,
    inserted: u64,
    broadcasts: u64,
    elements: BTreeSet<(Value, Tag)>,
    tombstones: BTreeSet<Tag>,
}

impl OrSetReplica {
    pub fn new(pid: Pid) -> Self {
        OrSetReplica {
            pid,
            inserted: 0,
            broadcasts: 0,
            elements: BTreeSet::new(),
            tombstones: BTreeSet::new(),
        }
    }

    fn live_tags(&self, v: &Value) -> Vec<Tag> {
        self.elements
            .iter()
            .filter(|(x, t)| x == v && !self.tombstones.contains(t))
            .map(|(_, t)| *t)
            .collect()
    }

    fn envelope(&mut self, payload: Payload) -> Envelope {
        let env = Envelope {
            sender: self.pid,
            broadcast_id: self.broadcasts,
            payload,
        };
        self.broadcasts += 1;
        env
    }
}

impl Replica for OrSetReplica {
    fn pid(&self) -> Pid {
        self.pid
    }

    fn update(&mut self, op: &Operation) -> Result<Envelope, ReplicaError> {
        match (op.name(), op.args(), op.is_update()) {
            ("I", [v], true) => {
                self.inserted += 1;
                let tag = Tag { pid: self.pid, counter: self.inserted };
                Ok(self.envelope(Payload::OrInsert { value: v.clone(), tag }))
            }
            ("D", [v], true) => {
                let tags = self.live_tags(v);
                Ok(self.envelope(Payload::OrDelete { value: v.clone(), tags }))
            }
            _ => Err(unsupported("or-set", op)),
        }
    }

    fn query(&mut self, q: &QueryInput) -> Result<Value, ReplicaError> {
        if q.name == "R" && q.args.is_empty() {
            Ok(self.state())
        } else {
            Err(unsupported("or-set", q.name.clone()))
        }
    }

    fn deliver(&mut self, env: &Envelope) -> Result<(), ReplicaError> {
        match &env.payload {
            Payload::OrInsert { value, tag } => {
                self.elements.insert((value.clone(), *tag));
            }
            Payload::OrDelete { tags, .. } => self.tombstones.extend(tags.iter().copied()),
            Payload::Stamped { .. } => return Err(unsupported("or-set", "timestamped payload")),
        }
        Ok(())
    }

    fn state(&self) -> Value {
        Value::Set(
            self.elements
                .iter()
                .filter(|(_, t)| !self.tombstones.contains(t))
                .map(|(v, _)| v.clone())
                .collect(),
        )
    }
}
