use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adt::{AdtSpec, OpKind, Operation, QueryInput, Support, Value};

use super::SimError;

/// One scripted operation. Queries carry no returned value; the replica
/// supplies it when the operation runs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScriptOp {
    Update(Operation),
    Query(QueryInput),
}

impl ScriptOp {
    pub fn is_update(&self) -> bool {
        matches!(self, ScriptOp::Update(_))
    }
}

impl From<Operation> for ScriptOp {
    fn from(op: Operation) -> Self {
        if op.is_update() {
            ScriptOp::Update(op)
        } else {
            ScriptOp::Query(op.input())
        }
    }
}

impl From<QueryInput> for ScriptOp {
    fn from(q: QueryInput) -> Self {
        ScriptOp::Query(q)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptRepr {
    kind: OpKind,
    op: String,
    #[serde(default)]
    args: Vec<Value>,
}

impl Serialize for ScriptOp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (kind, op, args) = match self {
            ScriptOp::Update(u) => (OpKind::Update, u.name().to_string(), u.args().to_vec()),
            ScriptOp::Query(q) => (OpKind::Query, q.name.clone(), q.args.clone()),
        };
        ScriptRepr { kind, op, args }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScriptOp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = ScriptRepr::deserialize(d)?;
        Ok(match r.kind {
            OpKind::Update => ScriptOp::Update(Operation::update(r.op, r.args)),
            OpKind::Query => ScriptOp::Query(QueryInput::new(r.op, r.args)),
        })
    }
}

/// Bounds, in logical steps, of the delay of each (message, destination)
/// pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModel {
    pub min: u64,
    pub max: u64,
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel { min: 1, max: 3 }
    }
}

/// Parameters for generated scripts: `ops` operations in total, dealt to
/// the processes in turn, each an update with probability `update_ratio`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomOps {
    pub ops: usize,
    #[serde(default = "half")]
    pub update_ratio: f64,
}

fn half() -> f64 {
    0.5
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

fn schema() -> u32 {
    1
}

/// A simulation input. Exactly one of `scripts` and `random` is set.
///
/// `crashes` maps a pid to the number of its script operations executed
/// before it crashes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub processes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scripts: Option<Vec<Vec<ScriptOp>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomOps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Support>,
    #[serde(default)]
    pub delay: DelayModel,
    #[serde(default = "yes")]
    pub fifo: bool,
    /// Logical steps between two operations of the same process.
    #[serde(default = "one")]
    pub op_interval: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub crashes: BTreeMap<u32, usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn scripted(scripts: Vec<Vec<ScriptOp>>) -> Self {
        Scenario {
            processes: scripts.len() as u32,
            scripts: Some(scripts),
            random: None,
            ..Scenario::random(0, 0)
        }
    }

    pub fn random(processes: u32, ops: usize) -> Self {
        Scenario {
            schema_version: 1,
            processes,
            scripts: None,
            random: Some(RandomOps { ops, update_ratio: 0.5 }),
            support: None,
            delay: DelayModel::default(),
            fifo: true,
            op_interval: 1,
            crashes: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_delay(mut self, min: u64, max: u64) -> Self {
        self.delay = DelayModel { min, max };
        self
    }

    pub fn with_fifo(mut self, fifo: bool) -> Self {
        self.fifo = fifo;
        self
    }

    pub fn with_crash(mut self, pid: u32, after_ops: usize) -> Self {
        self.crashes.insert(pid, after_ops);
        self
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = Some(support);
        self
    }

    pub fn parse(text: &str) -> Result<Scenario, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenarios always serialize");
        s.push('\n');
        s
    }

    /// Checks the scenario and returns the per-process scripts, generating
    /// them from `rng` when the scenario is random.
    pub(crate) fn scripts<R: Rng>(&self, spec: &dyn AdtSpec, rng: &mut R) -> Result<Vec<Vec<ScriptOp>>, SimError> {
        let invalid = |m: String| Err(SimError::InvalidScenario(m));
        if self.schema_version != 1 {
            return invalid(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.processes == 0 {
            return invalid("at least one process is required".into());
        }
        if self.delay.min > self.delay.max {
            return invalid(format!("delay min {} exceeds max {}", self.delay.min, self.delay.max));
        }
        if self.op_interval == 0 {
            return invalid("op_interval must be positive".into());
        }
        let scripts = match (&self.scripts, &self.random) {
            (Some(s), None) => {
                if s.len() != self.processes as usize {
                    return invalid(format!("{} scripts for {} processes", s.len(), self.processes));
                }
                s.clone()
            }
            (None, Some(r)) => {
                if !(0.0..=1.0).contains(&r.update_ratio) {
                    return invalid(format!("update_ratio {} is not in [0, 1]", r.update_ratio));
                }
                generate(spec, self.processes as usize, r, rng)?
            }
            _ => return invalid("exactly one of `scripts` and `random` must be given".into()),
        };
        let init = spec.initial_state();
        for (i, script) in scripts.iter().enumerate() {
            for op in script {
                let ok = match op {
                    ScriptOp::Update(u) => spec.transition(&init, u).is_ok(),
                    ScriptOp::Query(q) => spec.output(&init, q).is_ok(),
                };
                if !ok {
                    return invalid(format!("process {} uses an operation `{}` does not declare", i + 1, spec.name()));
                }
            }
        }
        for (&pid, &at) in &self.crashes {
            if pid == 0 || pid > self.processes {
                return invalid(format!("crash of unknown process {pid}"));
            }
            if at > scripts[pid as usize - 1].len() {
                return invalid(format!("crash step {at} of process {pid} is past its script"));
            }
        }
        Ok(scripts)
    }
}

fn generate<R: Rng>(spec: &dyn AdtSpec, n: usize, r: &RandomOps, rng: &mut R) -> Result<Vec<Vec<ScriptOp>>, SimError> {
    let updates = spec.update_alphabet();
    let queries = spec.query_alphabet();
    if (updates.is_empty() && r.update_ratio > 0.0) || (queries.is_empty() && r.update_ratio < 1.0) {
        return Err(SimError::InvalidScenario(format!("`{}` has an empty support", spec.name())));
    }
    let mut scripts = vec![Vec::new(); n];
    for i in 0..r.ops {
        let op = if rng.gen_bool(r.update_ratio) {
            ScriptOp::Update(updates.choose(rng).expect("non-empty").clone())
        } else {
            ScriptOp::Query(queries.choose(rng).expect("non-empty").clone())
        };
        scripts[i % n].push(op);
    }
    Ok(scripts)
}
