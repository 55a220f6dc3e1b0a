use std::collections::BTreeMap;

use crate::adt::{MemorySpec, Operation, QueryInput, Value};
use crate::history::Pid;

use super::{unsupported, Envelope, Payload, Replica, ReplicaError, Timestamp};

/// Shared memory replica: each register keeps the value of the write with
/// the largest timestamp received so far.
///
/// Unlike [`GenericReplica`](super::GenericReplica), reads do not advance
/// the clock.
#[derive(Debug)]
pub struct LwwMemoryReplica {
    pid: Pid,
    clock: u64,
    default: Value,
    mem: BTreeMap<String, (Timestamp, Value)>,
    broadcasts: u64,
}

impl LwwMemoryReplica {
    pub fn new(pid: Pid, spec: &MemorySpec) -> Self {
        LwwMemoryReplica {
            pid,
            clock: 0,
            default: spec.default_value().clone(),
            mem: BTreeMap::new(),
            broadcasts: 0,
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// The stored timestamp and value of `register`.
    pub fn cell(&self, register: &str) -> (Timestamp, Value) {
        self.mem
            .get(register)
            .cloned()
            .unwrap_or((Timestamp::ZERO, self.default.clone()))
    }

    pub fn read(&self, register: &str) -> Value {
        self.cell(register).1
    }
}

fn write_args(op: &Operation) -> Option<(&str, &Value)> {
    match (op.name(), op.args()) {
        ("write", [Value::Str(x), v]) => Some((x.as_str(), v)),
        _ => None,
    }
}

impl Replica for LwwMemoryReplica {
    fn pid(&self) -> Pid {
        self.pid
    }

    fn update(&mut self, op: &Operation) -> Result<Envelope, ReplicaError> {
        if write_args(op).is_none() || !op.is_update() {
            return Err(unsupported("lww-memory", op));
        }
        self.clock += 1;
        let env = Envelope {
            sender: self.pid,
            broadcast_id: self.broadcasts,
            payload: Payload::Stamped {
                ts: Timestamp { clock: self.clock, pid: self.pid },
                op: op.clone(),
            },
        };
        self.broadcasts += 1;
        Ok(env)
    }

    fn query(&mut self, q: &QueryInput) -> Result<Value, ReplicaError> {
        match (q.name.as_str(), q.args.as_slice()) {
            ("read", [Value::Str(x)]) => Ok(self.read(x)),
            _ => Err(unsupported("lww-memory", q.name.clone())),
        }
    }

    fn deliver(&mut self, env: &Envelope) -> Result<(), ReplicaError> {
        let Payload::Stamped { ts, op } = &env.payload else {
            return Err(unsupported("lww-memory", "set-tag payload"));
        };
        let (x, v) = write_args(op).ok_or_else(|| unsupported("lww-memory", op))?;
        self.clock = self.clock.max(ts.clock);
        if self.cell(x).0 < *ts {
            self.mem.insert(x.to_string(), (*ts, v.clone()));
        }
        Ok(())
    }

    /// The register contents in the shape of a memory state: registers
    /// holding the default value are omitted.
    fn state(&self) -> Value {
        Value::Map(
            self.mem
                .iter()
                .filter(|(_, (_, v))| *v != self.default)
                .map(|(x, (_, v))| (x.clone(), v.clone()))
                .collect(),
        )
    }
}
