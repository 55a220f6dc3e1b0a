//! Deterministic simulation of replicas exchanging broadcasts.
//!
//! Time is a logical step counter. Each process runs its script, one
//! operation every `op_interval` steps. An update is delivered to its
//! issuer at once and to every other live process after a delay sampled
//! per (message, destination) from the scenario's seeded generator; with
//! FIFO links a message never overtakes an earlier one on the same link.
//! At equal times crashes come first, then deliveries, then invocations.
//!
//! A crashed process performs no further operation and receives nothing,
//! but broadcasts it issued before crashing still reach everyone. When no
//! message is left in flight, each surviving process runs its type's
//! quiescence queries; the last one is recorded as repeating forever.

mod explore;
mod scenario;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adt::{spec_by_name, AdtError, AdtSpec, MemorySpec, Operation, Support, Value, SPEC_NAMES};
use crate::cli::trace::{TraceError, TraceFile};
use crate::history::{EventId, History, HistoryBuilder, HistoryError, Pid};
use crate::replication::{Envelope, GenericReplica, LwwMemoryReplica, OrSetReplica, Payload, Replica, ReplicaError};

pub use explore::schedule_space;
pub use scenario::{DelayModel, RandomOps, Scenario, ScriptOp};

/// The replication algorithm a simulation runs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Algo {
    /// Timestamped broadcast with replay, for the named type.
    Generic(String),
    LwwMemory,
    OrSet,
}

impl Algo {
    pub const NAMES: [&'static str; 5] = ["generic-set", "generic-gset", "generic-memory", "lww-memory", "or-set"];

    /// Name of the type whose histories the algorithm produces.
    pub fn spec_name(&self) -> &str {
        match self {
            Algo::Generic(name) => name,
            Algo::LwwMemory => "memory",
            Algo::OrSet => "set",
        }
    }

    /// The effective support: sets default to `{1, 2, 3}`.
    pub fn support(&self, given: Option<&Support>) -> Option<Support> {
        match (given, self.spec_name()) {
            (Some(s), _) => Some(s.clone()),
            (None, "set" | "gset") => Some(Support::Values(vec![1.into(), 2.into(), 3.into()])),
            (None, _) => None,
        }
    }

    pub fn spec(&self, given: Option<&Support>) -> Result<Arc<dyn AdtSpec>, SimError> {
        Ok(spec_by_name(self.spec_name(), self.support(given).as_ref())?)
    }

    fn replica(&self, pid: Pid, spec: &Arc<dyn AdtSpec>, support: Option<&Support>) -> Box<dyn Replica> {
        match self {
            Algo::Generic(_) => Box::new(GenericReplica::new(pid, spec.clone())),
            Algo::LwwMemory => {
                let memory = match support {
                    Some(Support::Memory { registers, values, default }) => {
                        MemorySpec::new(registers.clone(), values.clone(), default.clone())
                    }
                    _ => MemorySpec::default(),
                };
                Box::new(LwwMemoryReplica::new(pid, &memory))
            }
            Algo::OrSet => Box::new(OrSetReplica::new(pid)),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algo::Generic(name) => write!(f, "generic-{name}"),
            Algo::LwwMemory => f.write_str("lww-memory"),
            Algo::OrSet => f.write_str("or-set"),
        }
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lww-memory" => Ok(Algo::LwwMemory),
            "or-set" => Ok(Algo::OrSet),
            _ => match s.strip_prefix("generic-") {
                Some(name) if SPEC_NAMES.contains(&name) => Ok(Algo::Generic(name.to_string())),
                _ => Err(format!("unknown algorithm `{s}` (expected one of {})", Algo::NAMES.join(", "))),
            },
        }
    }
}

impl Serialize for Algo {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Algo {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Replica(#[from] ReplicaError),
    #[error(transparent)]
    Adt(#[from] AdtError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("more than {0} schedules")]
    BudgetExceeded(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimEventKind {
    Invoke,
    Deliver,
    Crash,
}

/// One entry of a run's log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: u64,
    pub kind: SimEventKind,
    pub pid: Pid,
    /// The recorded history event, for invocations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventId>,
    /// The update whose message is delivered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<EventId>,
    pub detail: String,
}

/// The outcome of a simulation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub algo: Algo,
    pub seed: u64,
    pub history: TraceFile,
    pub deliveries: Vec<SimEvent>,
    /// Replica states of the surviving processes after quiescence.
    pub final_states: BTreeMap<Pid, Value>,
}

impl RunRecord {
    /// The recorded history.
    pub fn history(&self) -> Result<History, TraceError> {
        self.history.to_history(&*self.history.spec()?)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("records always serialize");
        s.push('\n');
        s
    }
}

/// Runs `sc` under `algo`. Equal inputs give equal records.
pub fn run(sc: &Scenario, algo: &Algo) -> Result<RunRecord, SimError> {
    let spec = algo.spec(sc.support.as_ref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let scripts = sc.scripts(&*spec, &mut rng)?;
    let mut engine = Engine::new(sc, algo, spec);

    let mut queue: BTreeMap<(u64, u8, u64), Action> = BTreeMap::new();
    let mut seq = 0u64;
    let mut push = |queue: &mut BTreeMap<_, _>, time: u64, class: u8, action: Action| {
        queue.insert((time, class, seq), action);
        seq += 1;
    };
    for (i, script) in scripts.iter().enumerate() {
        let pid = i as u32 + 1;
        let stop = sc.crashes.get(&pid).copied();
        for k in 0..stop.unwrap_or(script.len()) {
            push(&mut queue, k as u64 * sc.op_interval, CLASS_INVOKE, Action::Invoke { pid, index: k });
        }
        if let Some(at) = stop {
            push(&mut queue, at as u64 * sc.op_interval, CLASS_CRASH, Action::Crash { pid });
        }
    }
    let mut link_free: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut now = 0;
    while let Some(((time, _, _), action)) = queue.pop_first() {
        now = time;
        match action {
            Action::Invoke { pid, index } => {
                let Some(msg) = engine.invoke(time, pid, &scripts[pid as usize - 1][index])? else {
                    continue;
                };
                for to in 1..=sc.processes {
                    if to == pid || engine.crashed(to) {
                        continue;
                    }
                    let mut at = time + rng.gen_range(sc.delay.min..=sc.delay.max);
                    if sc.fifo {
                        let free = link_free.entry((pid, to)).or_default();
                        at = at.max(*free);
                        *free = at;
                    }
                    push(&mut queue, at, CLASS_DELIVER, Action::Deliver { to, msg: msg.clone() });
                }
            }
            Action::Deliver { to, msg } => engine.deliver(time, to, &msg)?,
            Action::Crash { pid } => engine.crash(time, pid),
        }
    }
    engine.quiesce(now + 1)?;
    engine.finish()
}

const CLASS_CRASH: u8 = 0;
const CLASS_DELIVER: u8 = 1;
const CLASS_INVOKE: u8 = 2;

enum Action {
    Invoke { pid: u32, index: usize },
    Deliver { to: u32, msg: InFlight },
    Crash { pid: u32 },
}

/// A broadcast message and the `(pid, seq)` of the update that sent it.
#[derive(Clone, Debug)]
pub(crate) struct InFlight {
    env: Envelope,
    origin: (u32, usize),
}

struct RawEvent {
    time: u64,
    kind: SimEventKind,
    pid: u32,
    event: Option<(u32, usize)>,
    origin: Option<(u32, usize)>,
    detail: String,
}

/// Replicas plus everything recorded about them.
pub(crate) struct Engine {
    algo: Algo,
    seed: u64,
    support: Option<Support>,
    spec: Arc<dyn AdtSpec>,
    replicas: Vec<Box<dyn Replica>>,
    crashed: Vec<bool>,
    recorded: Vec<Vec<(Operation, bool)>>,
    log: Vec<RawEvent>,
}

impl Engine {
    pub(crate) fn new(sc: &Scenario, algo: &Algo, spec: Arc<dyn AdtSpec>) -> Self {
        let n = sc.processes as usize;
        let support = algo.support(sc.support.as_ref());
        Engine {
            algo: algo.clone(),
            seed: sc.seed,
            replicas: (1..=sc.processes).map(|p| algo.replica(Pid(p), &spec, support.as_ref())).collect(),
            support,
            spec,
            crashed: vec![false; n],
            recorded: vec![Vec::new(); n],
            log: Vec::new(),
        }
    }

    pub(crate) fn crashed(&self, pid: u32) -> bool {
        self.crashed[pid as usize - 1]
    }

    /// Runs one operation; an update is applied locally at once and its
    /// message returned for the other processes.
    pub(crate) fn invoke(&mut self, time: u64, pid: u32, op: &ScriptOp) -> Result<Option<InFlight>, SimError> {
        if self.crashed(pid) {
            return Ok(None);
        }
        let i = pid as usize - 1;
        let seq = self.recorded[i].len();
        let (label, msg) = match op {
            ScriptOp::Update(u) => {
                let env = self.replicas[i].update(u)?;
                self.replicas[i].deliver(&env)?;
                (u.clone(), Some(InFlight { env, origin: (pid, seq) }))
            }
            ScriptOp::Query(q) => {
                let ret = self.replicas[i].query(q)?;
                (q.clone().returning(ret), None)
            }
        };
        self.log.push(RawEvent {
            time,
            kind: SimEventKind::Invoke,
            pid,
            event: Some((pid, seq)),
            origin: None,
            detail: label.to_string(),
        });
        self.recorded[i].push((label, false));
        Ok(msg)
    }

    pub(crate) fn deliver(&mut self, time: u64, to: u32, msg: &InFlight) -> Result<(), SimError> {
        if self.crashed(to) {
            return Ok(());
        }
        self.replicas[to as usize - 1].deliver(&msg.env)?;
        let what = match &msg.env.payload {
            Payload::Stamped { ts, op } => format!("{op} at {ts}"),
            Payload::OrInsert { value, tag } => format!("I({value}) tag ({}, {})", tag.pid.0, tag.counter),
            Payload::OrDelete { value, tags } => format!("D({value}) removing {} tags", tags.len()),
        };
        self.log.push(RawEvent {
            time,
            kind: SimEventKind::Deliver,
            pid: to,
            event: None,
            origin: Some(msg.origin),
            detail: format!("{what} from {}", msg.env.sender),
        });
        Ok(())
    }

    pub(crate) fn crash(&mut self, time: u64, pid: u32) {
        self.crashed[pid as usize - 1] = true;
        self.log.push(RawEvent {
            time,
            kind: SimEventKind::Crash,
            pid,
            event: None,
            origin: None,
            detail: "crash".to_string(),
        });
    }

    pub(crate) fn quiesce(&mut self, time: u64) -> Result<(), SimError> {
        let queries = self.spec.quiescence_queries();
        for pid in 1..=self.replicas.len() as u32 {
            for q in &queries {
                self.invoke(time, pid, &ScriptOp::Query(q.clone()))?;
            }
            if let Some(last) = self.recorded[pid as usize - 1].last_mut() {
                if !self.crashed[pid as usize - 1] && !queries.is_empty() {
                    last.1 = true;
                }
            }
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> Result<RunRecord, SimError> {
        let mut builder = HistoryBuilder::default();
        for (i, ops) in self.recorded.into_iter().enumerate() {
            for (label, omega) in ops {
                builder = if omega {
                    builder.omega(i as u32 + 1, label)
                } else {
                    builder.process(i as u32 + 1, [label])
                };
            }
        }
        let history = builder.build()?;
        let id = |(pid, seq): (u32, usize)| history.chain(Pid(pid))[seq];
        let deliveries = self
            .log
            .into_iter()
            .map(|e| SimEvent {
                time: e.time,
                kind: e.kind,
                pid: Pid(e.pid),
                event: e.event.map(id),
                origin: e.origin.map(id),
                detail: e.detail,
            })
            .collect();
        let final_states = self
            .replicas
            .iter()
            .zip(&self.crashed)
            .filter(|(_, crashed)| !**crashed)
            .map(|(r, _)| (r.pid(), r.state()))
            .collect();
        Ok(RunRecord {
            schema_version: 1,
            algo: self.algo.clone(),
            seed: self.seed,
            history: TraceFile::from_history(self.algo.spec_name(), self.support, &history),
            deliveries,
            final_states,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adt::set_ops::insert;
    use crate::adt::{recognizes, QueryInput};

    fn r() -> ScriptOp {
        ScriptOp::Query(QueryInput::new("R", vec![]))
    }

    #[test]
    fn algo_names_round_trip() {
        for name in Algo::NAMES {
            assert_eq!(name.parse::<Algo>().unwrap().to_string(), name);
        }
        assert!("generic-stack".parse::<Algo>().is_err());
    }

    #[test]
    fn late_cross_delivery_reads_own_insert_first() {
        let sc = Scenario::scripted(vec![vec![insert(1).into(), r()], vec![insert(2).into(), r()]]).with_delay(10, 10);
        let rec = run(&sc, &Algo::Generic("set".into())).unwrap();
        let h = rec.history().unwrap();
        let text = h.to_string();
        assert_eq!(text, "p1: I(1) R/{1} R/{1,2}^ω\np2: I(2) R/{2} R/{1,2}^ω");
        assert_eq!(rec.final_states[&Pid(1)], Value::set([1, 2]));
    }

    #[test]
    fn single_process_history_is_sequential() {
        for seed in 0..20 {
            let sc = Scenario::random(1, 8).with_seed(seed);
            let rec = run(&sc, &Algo::Generic("set".into())).unwrap();
            let h = rec.history().unwrap();
            let spec = rec.history.spec().unwrap();
            assert!(recognizes(&*spec, h.events().iter().map(|e| &e.label)).unwrap());
        }
    }

    #[test]
    fn or_set_keeps_both_insertions() {
        let rec = run(&crate::fixtures::fig1b_scenario(), &Algo::OrSet).unwrap();
        assert_eq!(rec.final_states[&Pid(1)], Value::set([1, 2]));
        assert_eq!(rec.final_states[&Pid(2)], Value::set([1, 2]));
    }

    #[test]
    fn crashed_process_stops_but_its_broadcasts_arrive() {
        let sc = Scenario::scripted(vec![vec![insert(1).into(), insert(2).into()], vec![r()]])
            .with_delay(3, 3)
            .with_crash(1, 1);
        let rec = run(&sc, &Algo::Generic("set".into())).unwrap();
        assert!(!rec.final_states.contains_key(&Pid(1)));
        assert_eq!(rec.final_states[&Pid(2)], Value::set([1]));
        let h = rec.history().unwrap();
        assert_eq!(h.chain(Pid(1)).len(), 1);
        assert!(h.omega_events().all(|e| e.pid == Pid(2)));
        assert!(rec.deliveries.iter().any(|e| e.kind == SimEventKind::Crash && e.pid == Pid(1)));
        assert!(!rec.deliveries.iter().any(|e| e.pid == Pid(1) && e.time >= 1 && e.kind != SimEventKind::Crash));
    }

    #[test]
    fn memory_quiescence_reads_every_register() {
        let sc = Scenario::random(2, 6).with_seed(3);
        let rec = run(&sc, &Algo::LwwMemory).unwrap();
        let h = rec.history().unwrap();
        for pid in [Pid(1), Pid(2)] {
            let chain = h.chain(pid);
            let tail: Vec<String> = chain[chain.len() - 2..]
                .iter()
                .map(|id| h.get(*id).unwrap().label.args()[0].to_string())
                .collect();
            assert_eq!(tail, ["x", "y"]);
        }
        assert_eq!(h.omega_events().count(), 2);
    }

    #[test]
    fn rejects_invalid_scenarios() {
        let algo = Algo::Generic("set".into());
        let bad = [
            Scenario::random(0, 3),
            Scenario::random(2, 3).with_delay(4, 1),
            Scenario::random(2, 3).with_crash(3, 0),
            Scenario::scripted(vec![vec![r()]]).with_crash(1, 2),
            Scenario::scripted(vec![vec![ScriptOp::Update(crate::adt::memory_ops::write("x", 1))]]),
        ];
        for sc in bad {
            assert!(matches!(run(&sc, &algo), Err(SimError::InvalidScenario(_))), "{sc:?}");
        }
        assert!(Scenario::parse(r#"{"processes": 2}"#).is_ok());
        assert!(matches!(run(&Scenario::parse(r#"{"processes": 2}"#).unwrap(), &algo), Err(SimError::InvalidScenario(_))));
        assert!(Scenario::parse(r#"{"processes": 2, "bogus": 1}"#).is_err());
    }

    #[test]
    fn same_inputs_same_bytes() {
        let sc = Scenario::random(3, 9).with_seed(42).with_delay(1, 6).with_fifo(false);
        let a = run(&sc, &Algo::Generic("set".into())).unwrap().to_json();
        let b = run(&sc, &Algo::Generic("set".into())).unwrap().to_json();
        assert_eq!(a, b);
        let c = run(&sc.clone().with_seed(43), &Algo::Generic("set".into())).unwrap().to_json();
        assert_ne!(a, c);
    }
}
