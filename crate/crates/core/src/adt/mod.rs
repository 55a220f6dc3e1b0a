//! Sequential specifications of update-query abstract data types.
//!
//! An update-query type splits its operations into *updates*, which move
//! the object from one state to another and return nothing, and *queries*,
//! which read the state and leave it unchanged. A specification is a
//! deterministic transition system: an initial state, a transition function
//! for updates and an output function for queries.
//!
//! [`replay`] folds updates from the initial state and [`recognizes`]
//! decides whether a finite word of operations is a legal sequential
//! history, i.e. a prefix of a word accepted by the transition system.

mod memory;
mod set;
mod value;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use memory::MemorySpec;
pub use set::SetSpec;
pub use value::Value;

/// Convenience constructors for set operations.
pub mod set_ops {
    pub use super::set::{delete, insert, read};
}

/// Convenience constructors for shared-memory operations.
pub mod memory_ops {
    pub use super::memory::{read, write};
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdtError {
    #[error("operation `{op}` is not declared by the `{spec}` specification")]
    UnknownOperation { spec: String, op: String },
    #[error("state {state} is not a valid `{spec}` state")]
    InvalidState { spec: String, state: String },
    #[error("unknown specification `{0}`")]
    UnknownSpec(String),
    #[error("support declaration does not fit the `{spec}` specification: {reason}")]
    BadSupport { spec: String, reason: String },
    #[error("state enumeration exceeded its budget of {0} states")]
    BudgetExceeded(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Update,
    Query,
}

/// The input half of a query: its name and arguments.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryInput {
    pub name: String,
    pub args: Vec<Value>,
}

impl QueryInput {
    pub fn new(name: impl Into<String>, args: Vec<Value>) -> Self {
        QueryInput {
            name: name.into(),
            args,
        }
    }

    /// Pairs this input with an observed output.
    pub fn returning(self, returned: Value) -> Operation {
        Operation::query(self.name, self.args, returned)
    }
}

impl fmt::Display for QueryInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        write_args(f, &self.args)
    }
}

/// An operation label: either an update, or a query together with the value
/// it returned.
///
/// The constructors enforce that an update carries no returned value and a
/// query carries exactly one.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Operation {
    kind: OpKind,
    name: String,
    args: Vec<Value>,
    returned: Option<Value>,
}

impl Operation {
    pub fn update(name: impl Into<String>, args: Vec<Value>) -> Self {
        Operation {
            kind: OpKind::Update,
            name: name.into(),
            args,
            returned: None,
        }
    }

    pub fn query(name: impl Into<String>, args: Vec<Value>, returned: Value) -> Self {
        Operation {
            kind: OpKind::Query,
            name: name.into(),
            args,
            returned: Some(returned),
        }
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn is_update(&self) -> bool {
        self.kind == OpKind::Update
    }

    pub fn is_query(&self) -> bool {
        self.kind == OpKind::Query
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[Value] {
        &self.args
    }

    /// The value returned by a query; `None` for updates.
    pub fn returned(&self) -> Option<&Value> {
        self.returned.as_ref()
    }

    /// The input half of a query (for updates, the name and arguments).
    pub fn input(&self) -> QueryInput {
        QueryInput {
            name: self.name.clone(),
            args: self.args.clone(),
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if self.is_update() || !self.args.is_empty() {
            write_args(f, &self.args)?;
        }
        if let Some(ret) = &self.returned {
            write!(f, "/{ret}")?;
        }
        Ok(())
    }
}

/// Serialized form: `{"kind", "op", "args", "returns"?}`.
#[derive(Serialize, Deserialize)]
struct OperationRepr {
    kind: OpKind,
    op: String,
    #[serde(default)]
    args: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    returns: Option<Value>,
}

impl Serialize for Operation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        OperationRepr {
            kind: self.kind,
            op: self.name.clone(),
            args: self.args.clone(),
            returns: self.returned.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = OperationRepr::deserialize(d)?;
        match (r.kind, r.returns) {
            (OpKind::Update, None) => Ok(Operation::update(r.op, r.args)),
            (OpKind::Query, Some(ret)) => Ok(Operation::query(r.op, r.args, ret)),
            (OpKind::Update, Some(_)) => Err(serde::de::Error::custom(format!("update `{}` cannot return a value", r.op))),
            (OpKind::Query, None) => Err(serde::de::Error::custom(format!("query `{}` needs a returned value", r.op))),
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Value]) -> fmt::Result {
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

/// A partial description of a map-shaped state: the listed keys hold the
/// listed values, every other key is unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StatePattern {
    pub fixed: BTreeMap<String, Value>,
}

impl StatePattern {
    /// Conjunction of two patterns, or `None` when they fix a key to
    /// different values.
    pub fn merge(&self, other: &StatePattern) -> Option<StatePattern> {
        let mut fixed = self.fixed.clone();
        for (k, v) in &other.fixed {
            match fixed.get(k) {
                Some(existing) if existing != v => return None,
                _ => {
                    fixed.insert(k.clone(), v.clone());
                }
            }
        }
        Some(StatePattern { fixed })
    }
}

/// Candidate states explaining one query observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Abduction {
    /// An explicit finite set of candidate states.
    States(Vec<Value>),
    /// Every state matching the pattern.
    Pattern(StatePattern),
}

/// An executable sequential specification of an update-query type.
///
/// States are plain [`Value`]s. `transition` and `output` must be
/// deterministic; they return [`AdtError::UnknownOperation`] for operations
/// the specification does not declare.
pub trait AdtSpec: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    fn initial_state(&self) -> Value;

    fn transition(&self, state: &Value, update: &Operation) -> Result<Value, AdtError>;

    fn output(&self, state: &Value, query: &QueryInput) -> Result<Value, AdtError>;

    fn state_equal(&self, a: &Value, b: &Value) -> bool {
        a == b
    }

    /// Exact abduction hook: the states in which `query` returns `output`.
    /// Specifications without a hook return `None` and checkers fall back to
    /// enumerating states reachable with the updates of the history at hand.
    fn abduce_states(&self, _query: &QueryInput, _output: &Value) -> Option<Abduction> {
        None
    }

    /// Turns a pattern produced by [`AdtSpec::abduce_states`] into a concrete
    /// state.
    fn materialize(&self, _pattern: &StatePattern) -> Option<Value> {
        None
    }

    /// Update operations over the declared finite support.
    fn update_alphabet(&self) -> Vec<Operation>;

    /// Query inputs over the declared finite support.
    fn query_alphabet(&self) -> Vec<QueryInput>;

    /// Queries that together observe the whole state, issued once a run has
    /// quiesced.
    fn quiescence_queries(&self) -> Vec<QueryInput> {
        self.query_alphabet()
    }
}

/// Support declaration used to instantiate a specification by name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Support {
    Values(Vec<Value>),
    Memory {
        registers: Vec<String>,
        values: Vec<Value>,
        default: Value,
    },
}

/// Names accepted by [`spec_by_name`].
pub const SPEC_NAMES: [&str; 3] = ["set", "gset", "memory"];

/// Instantiates a registered specification.
pub fn spec_by_name(name: &str, support: Option<&Support>) -> Result<Arc<dyn AdtSpec>, AdtError> {
    let bad = |reason: &str| AdtError::BadSupport {
        spec: name.to_string(),
        reason: reason.to_string(),
    };
    match name {
        "set" | "gset" => {
            let values = match support {
                None => Vec::new(),
                Some(Support::Values(v)) => v.clone(),
                Some(Support::Memory { .. }) => return Err(bad("expected a list of values")),
            };
            let spec = if name == "set" {
                SetSpec::new(values)
            } else {
                SetSpec::grow_only(values)
            };
            Ok(Arc::new(spec))
        }
        "memory" => match support {
            None => Ok(Arc::new(MemorySpec::default())),
            Some(Support::Memory {
                registers,
                values,
                default,
            }) => Ok(Arc::new(MemorySpec::new(
                registers.clone(),
                values.clone(),
                default.clone(),
            ))),
            Some(Support::Values(_)) => Err(bad("expected {registers, values, default}")),
        },
        other => Err(AdtError::UnknownSpec(other.to_string())),
    }
}

fn require_update(spec: &dyn AdtSpec, op: &Operation) -> Result<(), AdtError> {
    if op.is_update() {
        Ok(())
    } else {
        Err(AdtError::UnknownOperation {
            spec: spec.name().to_string(),
            op: op.to_string(),
        })
    }
}

/// Folds `updates` over the transition function, starting from the initial
/// state.
pub fn replay<'a, I>(spec: &dyn AdtSpec, updates: I) -> Result<Value, AdtError>
where
    I: IntoIterator<Item = &'a Operation>,
{
    replay_from(spec, spec.initial_state(), updates)
}

/// Folds `updates` starting from `state`.
pub fn replay_from<'a, I>(spec: &dyn AdtSpec, state: Value, updates: I) -> Result<Value, AdtError>
where
    I: IntoIterator<Item = &'a Operation>,
{
    updates.into_iter().try_fold(state, |s, u| {
        require_update(spec, u)?;
        spec.transition(&s, u)
    })
}

/// Whether the query observation `q` is consistent with `state`.
pub fn query_holds(spec: &dyn AdtSpec, state: &Value, q: &Operation) -> Result<bool, AdtError> {
    match q.returned() {
        Some(ret) => Ok(&spec.output(state, &q.input())? == ret),
        None => Err(AdtError::UnknownOperation {
            spec: spec.name().to_string(),
            op: q.to_string(),
        }),
    }
}

/// Applies one operation of a word: updates move the state, queries must
/// agree with it. Returns `None` when a query disagrees.
pub fn step(spec: &dyn AdtSpec, state: &Value, op: &Operation) -> Result<Option<Value>, AdtError> {
    if op.is_update() {
        spec.transition(state, op).map(Some)
    } else if query_holds(spec, state, op)? {
        Ok(Some(state.clone()))
    } else {
        Ok(None)
    }
}

/// Whether `word` is a finite prefix of a sequential history accepted by
/// `spec`.
pub fn recognizes<'a, I>(spec: &dyn AdtSpec, word: I) -> Result<bool, AdtError>
where
    I: IntoIterator<Item = &'a Operation>,
{
    let mut state = spec.initial_state();
    for op in word {
        match step(spec, &state, op)? {
            Some(next) => state = next,
            None => return Ok(false),
        }
    }
    Ok(true)
}

/// States reachable from the initial state by applying at most
/// `updates.len()` of the given update labels, repetitions allowed.
///
/// This covers every replay of every subsequence of `updates` in every
/// order, and is the fallback candidate set for specifications without an
/// abduction hook.
pub fn reachable_states(
    spec: &dyn AdtSpec,
    updates: &[Operation],
    budget: u64,
) -> Result<Vec<Value>, AdtError> {
    let labels: BTreeSet<&Operation> = updates.iter().collect();
    let mut seen: BTreeSet<Value> = BTreeSet::new();
    let mut order = Vec::new();
    let mut frontier = VecDeque::new();
    let init = spec.initial_state();
    seen.insert(init.clone());
    order.push(init.clone());
    frontier.push_back((init, 0usize));
    while let Some((state, depth)) = frontier.pop_front() {
        if depth == updates.len() {
            continue;
        }
        for u in &labels {
            let next = spec.transition(&state, u)?;
            if seen.insert(next.clone()) {
                if seen.len() as u64 > budget {
                    return Err(AdtError::BudgetExceeded(budget));
                }
                order.push(next.clone());
                frontier.push_back((next, depth + 1));
            }
        }
    }
    Ok(order)
}

/// Candidate states for the observation `query`: the specification's hook
/// when it has one, otherwise the reachable states (see [`reachable_states`])
/// filtered by the observation.
pub fn abduce_states(
    spec: &dyn AdtSpec,
    query: &Operation,
    context_updates: &[Operation],
    budget: u64,
) -> Result<Abduction, AdtError> {
    let ret = query.returned().ok_or_else(|| AdtError::UnknownOperation {
        spec: spec.name().to_string(),
        op: query.to_string(),
    })?;
    if let Some(hook) = spec.abduce_states(&query.input(), ret) {
        return Ok(hook);
    }
    let mut states = Vec::new();
    for s in reachable_states(spec, context_updates, budget)? {
        if query_holds(spec, &s, query)? {
            states.push(s);
        }
    }
    Ok(Abduction::States(states))
}

/// Outcome of searching for one state explaining a group of queries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateSearch {
    Found(Value),
    /// No candidate survived; `exact` records whether the candidates came
    /// from exact hooks (a definitive "no") or from the reachable-state
    /// fallback (possibly spurious).
    NotFound { exact: bool },
}

/// Finds a single state in which every query of `queries` returns its
/// recorded value.
///
/// With no queries, the initial state is returned. Every candidate is
/// re-verified against the output function, so hooks may over-approximate.
pub fn consistent_state(
    spec: &dyn AdtSpec,
    queries: &[&Operation],
    context_updates: &[Operation],
    budget: u64,
) -> Result<StateSearch, AdtError> {
    if queries.is_empty() {
        return Ok(StateSearch::Found(spec.initial_state()));
    }
    let mut hooks = Vec::with_capacity(queries.len());
    for q in queries {
        let ret = q.returned().ok_or_else(|| AdtError::UnknownOperation {
            spec: spec.name().to_string(),
            op: q.to_string(),
        })?;
        hooks.push(spec.abduce_states(&q.input(), ret));
    }
    let exact = hooks.iter().all(Option::is_some);
    let candidates: Vec<Value> = if exact {
        let explicit = hooks.iter().flatten().find_map(|a| match a {
            Abduction::States(s) => Some(s.clone()),
            Abduction::Pattern(_) => None,
        });
        match explicit {
            Some(states) => states,
            None => {
                let mut merged = StatePattern::default();
                for a in hooks.iter().flatten() {
                    if let Abduction::Pattern(p) = a {
                        match merged.merge(p) {
                            Some(m) => merged = m,
                            None => return Ok(StateSearch::NotFound { exact }),
                        }
                    }
                }
                spec.materialize(&merged).into_iter().collect()
            }
        }
    } else {
        reachable_states(spec, context_updates, budget)?
    };
    for s in candidates {
        let mut ok = true;
        for q in queries {
            if !query_holds(spec, &s, q)? {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(StateSearch::Found(s));
        }
    }
    Ok(StateSearch::NotFound { exact })
}
