use std::collections::BTreeSet;

use super::{Abduction, AdtError, AdtSpec, Operation, QueryInput, Value};

/// The set object over a finite support: updates `I(v)` and `D(v)`, query
/// `R` returning the whole content.
///
/// The grow-only variant declares no deletion. Values outside the support
/// are accepted by the transition function; the support only bounds the
/// operation alphabets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetSpec {
    support: BTreeSet<Value>,
    grow_only: bool,
}

impl SetSpec {
    pub fn new<I: IntoIterator<Item = Value>>(support: I) -> Self {
        SetSpec {
            support: support.into_iter().collect(),
            grow_only: false,
        }
    }

    pub fn grow_only<I: IntoIterator<Item = Value>>(support: I) -> Self {
        SetSpec {
            support: support.into_iter().collect(),
            grow_only: true,
        }
    }

    /// A set over integer support.
    pub fn of_ints<I: IntoIterator<Item = i64>>(support: I) -> Self {
        Self::new(support.into_iter().map(Value::Int))
    }

    pub fn support(&self) -> &BTreeSet<Value> {
        &self.support
    }

    fn unknown(&self, op: impl ToString) -> AdtError {
        AdtError::UnknownOperation {
            spec: self.name().to_string(),
            op: op.to_string(),
        }
    }

    fn contents<'a>(&self, state: &'a Value) -> Result<&'a BTreeSet<Value>, AdtError> {
        state.as_set().ok_or_else(|| AdtError::InvalidState {
            spec: self.name().to_string(),
            state: state.to_string(),
        })
    }
}

impl AdtSpec for SetSpec {
    fn name(&self) -> &str {
        if self.grow_only {
            "gset"
        } else {
            "set"
        }
    }

    fn initial_state(&self) -> Value {
        Value::Set(BTreeSet::new())
    }

    fn transition(&self, state: &Value, update: &Operation) -> Result<Value, AdtError> {
        let mut s = self.contents(state)?.clone();
        match (update.name(), update.args()) {
            ("I", [v]) => {
                s.insert(v.clone());
            }
            ("D", [v]) if !self.grow_only => {
                s.remove(v);
            }
            _ => return Err(self.unknown(update)),
        }
        Ok(Value::Set(s))
    }

    fn output(&self, state: &Value, query: &QueryInput) -> Result<Value, AdtError> {
        if query.name == "R" && query.args.is_empty() {
            Ok(Value::Set(self.contents(state)?.clone()))
        } else {
            Err(self.unknown(query))
        }
    }

    // A read reveals the full state.
    fn abduce_states(&self, query: &QueryInput, output: &Value) -> Option<Abduction> {
        if query.name != "R" {
            return None;
        }
        Some(Abduction::States(match output {
            Value::Set(_) => vec![output.clone()],
            _ => Vec::new(),
        }))
    }

    fn update_alphabet(&self) -> Vec<Operation> {
        let mut ops: Vec<Operation> = self
            .support
            .iter()
            .map(|v| Operation::update("I", vec![v.clone()]))
            .collect();
        if !self.grow_only {
            ops.extend(
                self.support
                    .iter()
                    .map(|v| Operation::update("D", vec![v.clone()])),
            );
        }
        ops
    }

    fn query_alphabet(&self) -> Vec<QueryInput> {
        vec![QueryInput::new("R", Vec::new())]
    }
}

pub fn insert(v: i64) -> Operation {
    Operation::update("I", vec![Value::Int(v)])
}

pub fn delete(v: i64) -> Operation {
    Operation::update("D", vec![Value::Int(v)])
}

/// `R/s`: a read that returned the integers in `contents`.
pub fn read(contents: &[i64]) -> Operation {
    Operation::query("R", Vec::new(), Value::set(contents.iter().copied()))
}
