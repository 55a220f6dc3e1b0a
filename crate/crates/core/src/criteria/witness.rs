use std::collections::{BTreeMap, BTreeSet};

use crate::adt::{query_holds, recognizes, replay, AdtSpec, Value};
use crate::history::{EventId, History};

use super::visibility::{insert_wins_holds, set_universe};
use super::{CheckError, Criterion, VisibilityAssignment, Verdict, ViewState, Witness};

/// Re-checks the witness of a positive verdict directly against the
/// definition of its criterion.
///
/// Returns `Ok(false)` when the witness is well formed but does not
/// certify the criterion, and an error when it is missing, of the wrong
/// kind, or mentions unknown events.
pub fn validate_witness(h: &History, spec: &dyn AdtSpec, verdict: &Verdict) -> Result<bool, CheckError> {
    let witness = verdict
        .witness
        .as_ref()
        .ok_or_else(|| malformed("verdict carries no witness"))?;
    match (verdict.criterion, witness) {
        (Criterion::Ec, Witness::State { state }) => omega_hold(h, spec, state),
        (Criterion::Uc, Witness::UpdateOrder { events }) => {
            known(h, events)?;
            let updates: BTreeSet<EventId> = h.updates().map(|e| e.id).collect();
            if !h.is_linearization_of(events, &updates) {
                return Ok(false);
            }
            omega_hold(h, spec, &replay(spec, h.labels(events))?)
        }
        (Criterion::Pc, Witness::ChainWords { omega_k, words }) => chain_words(h, spec, *omega_k, words),
        (Criterion::Sec, Witness::Visibility { vis, states, .. }) => visibility(h, spec, vis, states),
        (Criterion::IwSec, Witness::Visibility { vis, states, .. }) => {
            let universe = set_universe(h)?;
            if !visibility(h, spec, vis, states)? {
                return Ok(false);
            }
            Ok(h.queries().all(|q| {
                let visible = vis.visible_updates(h, q.id);
                insert_wins_holds(h, &universe, &q.label, &visible, |a, b| vis.sees(a, b))
            }))
        }
        (Criterion::Suc, Witness::Visibility { vis, states, order: Some(order) }) => {
            known(h, order)?;
            if !visibility(h, spec, vis, states)? || !h.is_linearization_of(order, &h.ids().collect()) {
                return Ok(false);
            }
            let rank: BTreeMap<EventId, usize> = order.iter().enumerate().map(|(i, e)| (*e, i)).collect();
            if vis.pairs().iter().any(|(a, b)| rank[a] > rank[b]) {
                return Ok(false);
            }
            for q in h.queries() {
                let mut visible = vis.visible_updates(h, q.id);
                visible.sort_by_key(|e| rank[e]);
                if !query_holds(spec, &replay(spec, h.labels(&visible))?, &q.label)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        (c, _) => Err(malformed(&format!("witness kind does not match criterion {c}"))),
    }
}

fn malformed(msg: &str) -> CheckError {
    CheckError::MalformedWitness(msg.to_string())
}

fn known(h: &History, ids: &[EventId]) -> Result<(), CheckError> {
    match ids.iter().find(|id| !h.contains(**id)) {
        Some(id) => Err(malformed(&format!("unknown event {id}"))),
        None => Ok(()),
    }
}

fn omega_hold(h: &History, spec: &dyn AdtSpec, state: &Value) -> Result<bool, CheckError> {
    for q in h.omega_events() {
        if !query_holds(spec, state, &q.label)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn chain_words(h: &History, spec: &dyn AdtSpec, k: usize, words: &[Vec<EventId>]) -> Result<bool, CheckError> {
    let ex = h.expand_omega(k)?;
    let pids = ex.pids();
    if words.len() != pids.len() {
        return Err(malformed(&format!("{} words for {} processes", words.len(), pids.len())));
    }
    let updates: BTreeSet<EventId> = ex.updates().map(|e| e.id).collect();
    for (pid, word) in pids.into_iter().zip(words) {
        known(&ex, word)?;
        let mut subset = updates.clone();
        subset.extend(ex.chain(pid));
        if !ex.is_linearization_of(word, &subset) {
            return Ok(false);
        }
        let last_update = word.iter().rposition(|id| updates.contains(id));
        let tails_ok = word.iter().enumerate().all(|(at, id)| {
            let tail = ex.get(*id).and_then(|e| e.omega_copy).is_some_and(|c| c.is_last());
            !tail || last_update.is_none_or(|u| u < at)
        });
        if !tails_ok || !recognizes(spec, ex.labels(word))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Structural properties of `vis` plus strong convergence: each query
/// agrees with the state recorded for its exact visible set, and distinct
/// records have distinct visible sets.
fn visibility(
    h: &History,
    spec: &dyn AdtSpec,
    vis: &VisibilityAssignment,
    states: &[ViewState],
) -> Result<bool, CheckError> {
    if !vis.mentions_only(h) {
        return Err(malformed("visibility mentions unknown events"));
    }
    let structural = vis.is_reflexive(h)
        && vis.contains_program_order(h)
        && vis.is_acyclic(h)
        && vis.satisfies_growth(h)
        && vis.satisfies_eventual_delivery(h);
    if !structural {
        return Ok(false);
    }
    let mut by_view: BTreeMap<BTreeSet<EventId>, &Value> = BTreeMap::new();
    for s in states {
        known(h, &s.visible)?;
        if by_view.insert(s.visible.iter().copied().collect(), &s.state).is_some() {
            return Ok(false);
        }
    }
    for q in h.queries() {
        let view: BTreeSet<EventId> = vis.visible_updates(h, q.id).into_iter().collect();
        let Some(state) = by_view.get(&view) else {
            return Ok(false);
        };
        if !query_holds(spec, state, &q.label)? {
            return Ok(false);
        }
    }
    Ok(true)
}
