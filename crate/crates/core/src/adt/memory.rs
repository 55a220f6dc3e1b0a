use std::collections::BTreeMap;

use super::{Abduction, AdtError, AdtSpec, Operation, QueryInput, StatePattern, Value};

/// Shared memory: registers named by strings, `write(x, v)` updates and
/// `read(x)` queries returning the last value written to `x`, or the
/// default value if `x` was never written.
///
/// States are maps holding only registers whose value differs from the
/// default, so structural equality coincides with observational equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemorySpec {
    registers: Vec<String>,
    values: Vec<Value>,
    default: Value,
}

impl Default for MemorySpec {
    fn default() -> Self {
        MemorySpec::new(
            vec!["x".to_string(), "y".to_string()],
            vec![Value::Int(1), Value::Int(2), Value::Int(3)],
            Value::Int(0),
        )
    }
}

impl MemorySpec {
    pub fn new(registers: Vec<String>, values: Vec<Value>, default: Value) -> Self {
        MemorySpec {
            registers,
            values,
            default,
        }
    }

    pub fn default_value(&self) -> &Value {
        &self.default
    }

    pub fn registers(&self) -> &[String] {
        &self.registers
    }

    fn unknown(&self, op: impl ToString) -> AdtError {
        AdtError::UnknownOperation {
            spec: "memory".to_string(),
            op: op.to_string(),
        }
    }

    fn cells<'a>(&self, state: &'a Value) -> Result<&'a BTreeMap<String, Value>, AdtError> {
        match state {
            Value::Map(m) => Ok(m),
            other => Err(AdtError::InvalidState {
                spec: "memory".to_string(),
                state: other.to_string(),
            }),
        }
    }
}

impl AdtSpec for MemorySpec {
    fn name(&self) -> &str {
        "memory"
    }

    fn initial_state(&self) -> Value {
        Value::Map(BTreeMap::new())
    }

    fn transition(&self, state: &Value, update: &Operation) -> Result<Value, AdtError> {
        let mut cells = self.cells(state)?.clone();
        match (update.name(), update.args()) {
            ("write", [Value::Str(x), v]) => {
                if *v == self.default {
                    cells.remove(x);
                } else {
                    cells.insert(x.clone(), v.clone());
                }
                Ok(Value::Map(cells))
            }
            _ => Err(self.unknown(update)),
        }
    }

    fn output(&self, state: &Value, query: &QueryInput) -> Result<Value, AdtError> {
        match (query.name.as_str(), query.args.as_slice()) {
            ("read", [Value::Str(x)]) => Ok(self
                .cells(state)?
                .get(x)
                .cloned()
                .unwrap_or_else(|| self.default.clone())),
            _ => Err(self.unknown(query)),
        }
    }

    fn abduce_states(&self, query: &QueryInput, output: &Value) -> Option<Abduction> {
        match (query.name.as_str(), query.args.as_slice()) {
            ("read", [Value::Str(x)]) => {
                let mut fixed = BTreeMap::new();
                fixed.insert(x.clone(), output.clone());
                Some(Abduction::Pattern(StatePattern { fixed }))
            }
            _ => None,
        }
    }

    fn materialize(&self, pattern: &StatePattern) -> Option<Value> {
        Some(Value::Map(
            pattern
                .fixed
                .iter()
                .filter(|(_, v)| **v != self.default)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        ))
    }

    fn update_alphabet(&self) -> Vec<Operation> {
        self.registers
            .iter()
            .flat_map(|x| self.values.iter().map(move |v| write(x, v.clone())))
            .collect()
    }

    fn query_alphabet(&self) -> Vec<QueryInput> {
        self.registers
            .iter()
            .map(|x| QueryInput::new("read", vec![Value::Str(x.clone())]))
            .collect()
    }
}

pub fn write(register: &str, v: impl Into<Value>) -> Operation {
    Operation::update("write", vec![Value::from(register), v.into()])
}

/// `read(x)/v`.
pub fn read(register: &str, returned: impl Into<Value>) -> Operation {
    Operation::query("read", vec![Value::from(register)], returned.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adt::{abduce_states, consistent_state, query_holds, replay, StateSearch};

    #[test]
    fn last_write_wins_sequentially() {
        let m = MemorySpec::default();
        let s = replay(&m, &[write("x", 3), write("x", 5)]).unwrap();
        assert!(query_holds(&m, &s, &read("x", 5)).unwrap());
        assert!(query_holds(&m, &s, &read("y", 0)).unwrap());
    }

    #[test]
    fn writing_the_default_normalizes() {
        let m = MemorySpec::default();
        let s = replay(&m, &[write("x", 3), write("x", 0)]).unwrap();
        assert_eq!(s, m.initial_state());
    }

    // The pattern fixing x=5 must agree, on every small assignment, with the
    // set of states where read(x) returns 5.
    #[test]
    fn abduction_pattern_matches_enumeration() {
        let m = MemorySpec::default();
        let Abduction::Pattern(p) = abduce_states(&m, &read("x", 5), &[], 10).unwrap() else {
            panic!("expected a pattern");
        };
        let mut fixed = BTreeMap::new();
        fixed.insert("x".to_string(), Value::Int(5));
        assert_eq!(p.fixed, fixed);
        for xv in 0..7 {
            for yv in 0..7 {
                let s = replay(&m, &[write("x", xv), write("y", yv)]).unwrap();
                let matches = p
                    .fixed
                    .iter()
                    .all(|(k, v)| m.output(&s, &QueryInput::new("read", vec![Value::from(k.as_str())])).unwrap() == *v);
                assert_eq!(matches, query_holds(&m, &s, &read("x", 5)).unwrap());
            }
        }
    }

    #[test]
    fn conflicting_reads_have_no_state() {
        let m = MemorySpec::default();
        let (a, b, c) = (read("x", 1), read("x", 2), read("y", 2));
        assert_eq!(
            consistent_state(&m, &[&a, &b], &[], 10).unwrap(),
            StateSearch::NotFound { exact: true }
        );
        let StateSearch::Found(s) = consistent_state(&m, &[&a, &c], &[], 10).unwrap() else {
            panic!()
        };
        assert!(query_holds(&m, &s, &a).unwrap() && query_holds(&m, &s, &c).unwrap());
    }

    #[test]
    fn register_must_be_a_string() {
        let m = MemorySpec::default();
        let op = Operation::update("write", vec![Value::Int(1), Value::Int(1)]);
        assert!(m.transition(&m.initial_state(), &op).is_err());
    }
}
