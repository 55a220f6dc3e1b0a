use crate::adt::{consistent_state, AdtSpec, Operation, StateSearch};
use crate::history::History;

use super::{CheckConfig, CheckError, Criterion, Verdict, Witness};

/// Eventual consistency: some single state satisfies every repeating query.
///
/// Non-repeating queries are the finitely many exceptions. A history
/// without repeating queries is trivially eventually consistent and the
/// initial state is returned as witness.
pub fn check_ec(h: &History, spec: &dyn AdtSpec, cfg: &CheckConfig) -> Result<Verdict, CheckError> {
    let omega: Vec<&Operation> = h.omega_events().map(|e| &e.label).collect();
    let updates: Vec<Operation> = h.updates().map(|e| e.label.clone()).collect();
    let observed = omega
        .iter()
        .map(|q| q.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    match consistent_state(spec, &omega, &updates, cfg.budget) {
        Ok(StateSearch::Found(state)) => {
            let diag = if omega.is_empty() {
                "no repeating query constrains the limit state".to_string()
            } else {
                format!("state {state} satisfies every repeating query")
            };
            Ok(Verdict::yes(Criterion::Ec, Witness::State { state }, 1, diag))
        }
        Ok(StateSearch::NotFound { exact: true }) => Ok(Verdict::no(
            Criterion::Ec,
            1,
            format!("no single state explains the repeating queries [{observed}]"),
        )),
        Ok(StateSearch::NotFound { exact: false }) => Ok(Verdict::no(
            Criterion::Ec,
            1,
            format!(
                "no-candidate-states: no state reachable with the history's updates explains [{observed}]; \
                 `{}` has no abduction hook, so unreachable states were not considered",
                spec.name()
            ),
        )),
        Err(crate::adt::AdtError::BudgetExceeded(_)) => Ok(Verdict::unknown(Criterion::Ec, cfg.budget)),
        Err(e) => Err(e.into()),
    }
}
