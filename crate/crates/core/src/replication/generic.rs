use std::sync::Arc;

use crate::adt::{AdtSpec, Operation, QueryInput, Value};
use crate::history::Pid;

use super::{unsupported, Envelope, Payload, Replica, ReplicaError, Timestamp};

/// Replica of any update-query type: every update is broadcast with a
/// Lamport timestamp, and a query replays all received updates in
/// timestamp order.
///
/// Updates are kept sorted on insertion. With memoization enabled the
/// replica also keeps the state after each prefix of that sequence; a late
/// arrival with a small timestamp invalidates the prefixes after it.
#[derive(Debug)]
pub struct GenericReplica {
    pid: Pid,
    clock: u64,
    spec: Arc<dyn AdtSpec>,
    updates: Vec<(Timestamp, Operation)>,
    broadcasts: u64,
    /// `prefix[i]` is the state after the first `i` updates.
    prefix: Option<Vec<Value>>,
}

impl GenericReplica {
    pub fn new(pid: Pid, spec: Arc<dyn AdtSpec>) -> Self {
        GenericReplica {
            pid,
            clock: 0,
            spec,
            updates: Vec::new(),
            broadcasts: 0,
            prefix: None,
        }
    }

    /// Enables memoized prefix states.
    pub fn memoized(mut self) -> Self {
        self.prefix = Some(vec![self.spec.initial_state()]);
        self
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Received updates in timestamp order.
    pub fn updates(&self) -> &[(Timestamp, Operation)] {
        &self.updates
    }

    fn current_state(&mut self) -> Result<Value, ReplicaError> {
        let Some(prefix) = &mut self.prefix else {
            return Ok(crate::adt::replay(&*self.spec, self.updates.iter().map(|(_, u)| u))?);
        };
        while prefix.len() <= self.updates.len() {
            let last = prefix.last().expect("prefix starts with the initial state");
            let next = self.spec.transition(last, &self.updates[prefix.len() - 1].1)?;
            prefix.push(next);
        }
        Ok(prefix[self.updates.len()].clone())
    }
}

impl Replica for GenericReplica {
    fn pid(&self) -> Pid {
        self.pid
    }

    fn update(&mut self, op: &Operation) -> Result<Envelope, ReplicaError> {
        if !op.is_update() {
            return Err(unsupported("generic", op));
        }
        // Rejects operations the type does not declare.
        self.spec.transition(&self.spec.initial_state(), op)?;
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
        self.clock += 1;
        let state = self.current_state()?;
        Ok(self.spec.output(&state, q)?)
    }

    fn deliver(&mut self, env: &Envelope) -> Result<(), ReplicaError> {
        let Payload::Stamped { ts, op } = &env.payload else {
            return Err(unsupported("generic", "set-tag payload"));
        };
        self.clock = self.clock.max(ts.clock);
        match self.updates.binary_search_by(|(t, u)| (t, u).cmp(&(ts, op))) {
            Ok(_) => {}
            Err(at) => {
                self.updates.insert(at, (*ts, op.clone()));
                if let Some(prefix) = &mut self.prefix {
                    prefix.truncate(at + 1);
                }
            }
        }
        Ok(())
    }

    fn state(&self) -> Value {
        crate::adt::replay(&*self.spec, self.updates.iter().map(|(_, u)| u))
            .expect("delivered updates were validated by their sender")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adt::set_ops::{delete, insert};
    use crate::adt::SetSpec;
    use proptest::prelude::*;

    fn spec() -> Arc<dyn AdtSpec> {
        Arc::new(SetSpec::of_ints([1, 2, 3]))
    }

    fn read() -> QueryInput {
        QueryInput::new("R", vec![])
    }

    fn stamped(clock: u64, pid: u32, op: Operation) -> Envelope {
        Envelope {
            sender: Pid(pid),
            broadcast_id: 0,
            payload: Payload::Stamped { ts: Timestamp::new(clock, pid), op },
        }
    }

    #[test]
    fn update_increments_clock() {
        let mut r = GenericReplica::new(Pid(1), spec());
        let env = r.update(&insert(1)).unwrap();
        assert!(matches!(env.payload, Payload::Stamped { ts, .. } if ts == Timestamp::new(1, 1)));
        r.clock = 7;
        let env = r.update(&delete(2)).unwrap();
        assert!(matches!(env.payload, Payload::Stamped { ts, .. } if ts == Timestamp::new(8, 1)));
        assert!(r.updates().is_empty());
    }

    #[test]
    fn delivery_merges_clock_by_max() {
        let mut r = GenericReplica::new(Pid(1), spec());
        r.clock = 3;
        r.deliver(&stamped(5, 2, insert(1))).unwrap();
        assert_eq!(r.clock(), 5);
        r.clock = 9;
        r.deliver(&stamped(4, 2, insert(2))).unwrap();
        assert_eq!(r.clock(), 9);
        r.deliver(&stamped(4, 2, insert(2))).unwrap();
        assert_eq!(r.updates().len(), 2);
    }

    #[test]
    fn query_replays_in_timestamp_order() {
        let mut r = GenericReplica::new(Pid(3), spec());
        assert_eq!(r.query(&read()).unwrap(), Value::set([]));
        r.deliver(&stamped(1, 2, insert(2))).unwrap();
        r.deliver(&stamped(1, 1, insert(1))).unwrap();
        assert_eq!(r.query(&read()).unwrap(), Value::set([1, 2]));

        let mut r = GenericReplica::new(Pid(3), spec());
        r.deliver(&stamped(2, 2, delete(1))).unwrap();
        r.deliver(&stamped(1, 1, insert(1))).unwrap();
        assert_eq!(r.query(&read()).unwrap(), Value::set([]));
        assert_eq!(r.clock(), 3);
    }

    #[test]
    fn rejects_undeclared_operations() {
        let mut r = GenericReplica::new(Pid(1), spec());
        assert!(r.update(&Operation::update("X", vec![])).is_err());
        assert!(r.query(&QueryInput::new("size", vec![])).is_err());
    }

    fn op_strategy() -> impl Strategy<Value = Operation> {
        (any::<bool>(), 1i64..=3).prop_map(|(ins, v)| if ins { insert(v) } else { delete(v) })
    }

    proptest! {
        // Memoized prefix states answer exactly like a full replay, for any
        // arrival order interleaved with queries.
        #[test]
        fn memoized_replay_equals_naive(
            arrivals in proptest::collection::vec((1u64..6, 1u32..4, op_strategy(), any::<bool>()), 0..20)
        ) {
            let mut naive = GenericReplica::new(Pid(9), spec());
            let mut memo = GenericReplica::new(Pid(9), spec()).memoized();
            for (clock, pid, op, ask) in arrivals {
                let env = stamped(clock, pid, op);
                naive.deliver(&env).unwrap();
                memo.deliver(&env).unwrap();
                if ask {
                    prop_assert_eq!(naive.query(&read()).unwrap(), memo.query(&read()).unwrap());
                }
            }
            prop_assert_eq!(naive.query(&read()).unwrap(), memo.query(&read()).unwrap());
            prop_assert_eq!(naive.state(), memo.state());
        }
    }
}
