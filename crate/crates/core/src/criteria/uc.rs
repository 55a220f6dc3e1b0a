use std::collections::BTreeSet;

use crate::adt::{query_holds, recognizes, AdtSpec, Operation, Value};
use crate::history::{Event, EventId, History};

use super::{conclude, Budget, CheckConfig, CheckError, Criterion, Halt, Verdict, Witness};

/// Update consistency.
///
/// With finitely many updates, dropping every non-repeating query and
/// placing the repeating ones after the last update is always the most
/// permissive choice of exceptions, so the criterion reduces to: some
/// linearization of the updates reaches a state satisfying every repeating
/// query. The search walks update linearizations depth-first, memoizing
/// `(progress, state)` pairs already known to fail.
pub fn check_uc(h: &History, spec: &dyn AdtSpec, cfg: &CheckConfig) -> Result<Verdict, CheckError> {
    let mut budget = Budget::new(cfg.budget);
    let outcome = search_uc(h, spec, &mut budget);
    conclude(Criterion::Uc, &budget, outcome)
}

fn search_uc(h: &History, spec: &dyn AdtSpec, budget: &mut Budget) -> Result<Verdict, Halt> {
    let chains: Vec<Vec<&Event>> = h
        .pids()
        .into_iter()
        .map(|p| {
            h.chain(p)
                .into_iter()
                .map(|id| h.get(id).expect("chain ids exist"))
                .filter(|e| e.is_update())
                .collect::<Vec<_>>()
        })
        .filter(|c| !c.is_empty())
        .collect();
    let mut search = UpdateOrderSearch {
        spec,
        chains,
        omega: h.omega_events().map(|e| &e.label).collect(),
        failed: BTreeSet::new(),
        word: Vec::new(),
        budget,
    };
    let mut pos = vec![0; search.chains.len()];
    if search.dfs(&mut pos, spec.initial_state())? {
        let events = search.word.clone();
        let text = h.labels(&events).map(|o| o.to_string()).collect::<Vec<_>>().join("·");
        let used = search.budget.used();
        Ok(Verdict::yes(
            Criterion::Uc,
            Witness::UpdateOrder { events },
            used,
            format!("update order {} explains every repeating query", if text.is_empty() { "ε" } else { &text }),
        ))
    } else {
        Ok(Verdict::no(
            Criterion::Uc,
            search.budget.used(),
            "no linearization of the updates reaches a state satisfying every repeating query",
        ))
    }
}

struct UpdateOrderSearch<'a, 'b> {
    spec: &'a dyn AdtSpec,
    chains: Vec<Vec<&'a Event>>,
    omega: Vec<&'a Operation>,
    failed: BTreeSet<(Vec<usize>, Value)>,
    word: Vec<EventId>,
    budget: &'b mut Budget,
}

impl UpdateOrderSearch<'_, '_> {
    fn dfs(&mut self, pos: &mut Vec<usize>, state: Value) -> Result<bool, Halt> {
        self.budget.tick()?;
        if pos.iter().zip(&self.chains).all(|(p, c)| *p == c.len()) {
            for q in &self.omega {
                if !query_holds(self.spec, &state, q)? {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
        let key = (pos.clone(), state);
        if self.failed.contains(&key) {
            return Ok(false);
        }
        let state = key.1.clone();
        for c in 0..self.chains.len() {
            if pos[c] == self.chains[c].len() {
                continue;
            }
            let e = self.chains[c][pos[c]];
            let next = self.spec.transition(&state, &e.label)?;
            pos[c] += 1;
            self.word.push(e.id);
            if self.dfs(pos, next)? {
                return Ok(true);
            }
            self.word.pop();
            pos[c] -= 1;
        }
        self.failed.insert(key);
        Ok(false)
    }
}

/// Brute-force update consistency on the history expanded with `k` copies
/// per repeating query.
///
/// Tries every subset of non-repeating queries as the exception set and
/// every linearization of the remaining events, accepting a word when the
/// specification recognizes it and the last copy of every repeating query
/// comes after every update (the copies stand for an infinite tail).
/// Shares no code with [`check_uc`] beyond the history primitives.
pub fn check_uc_oracle(
    h: &History,
    spec: &dyn AdtSpec,
    k: usize,
    cfg: &CheckConfig,
) -> Result<Verdict, CheckError> {
    let mut budget = Budget::new(cfg.budget);
    let outcome = oracle(h, spec, k, &mut budget);
    conclude(Criterion::Uc, &budget, outcome)
}

fn oracle(h: &History, spec: &dyn AdtSpec, k: usize, budget: &mut Budget) -> Result<Verdict, Halt> {
    let ex = h.expand_omega(k)?;
    let droppable: Vec<EventId> = ex
        .queries()
        .filter(|e| e.omega_copy.is_none())
        .map(|e| e.id)
        .collect();
    if droppable.len() >= 32 {
        return Err(Halt::Exhausted);
    }
    let updates: BTreeSet<EventId> = ex.updates().map(|e| e.id).collect();
    let tails: Vec<EventId> = ex
        .events()
        .iter()
        .filter(|e| e.omega_copy.is_some_and(|c| c.is_last()))
        .map(|e| e.id)
        .collect();
    for mask in 0u64..(1u64 << droppable.len()) {
        let dropped: BTreeSet<EventId> = droppable
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, id)| *id)
            .collect();
        let keep: BTreeSet<EventId> = ex.ids().filter(|id| !dropped.contains(id)).collect();
        for lin in ex.linearizations(&keep, budget.remaining())? {
            let word = lin?.word;
            budget.tick()?;
            let last_update = word.iter().rposition(|id| updates.contains(id));
            let tails_ok = tails.iter().all(|t| {
                let at = word.iter().position(|id| id == t).expect("tail copies are kept");
                last_update.is_none_or(|u| u < at)
            });
            if tails_ok && recognizes(spec, ex.labels(&word))? {
                let events: Vec<EventId> = word.into_iter().filter(|id| updates.contains(id)).collect();
                return Ok(Verdict::yes(
                    Criterion::Uc,
                    Witness::UpdateOrder { events },
                    budget.used(),
                    format!("accepted word found after dropping {} finite queries", dropped.len()),
                ));
            }
        }
    }
    Ok(Verdict::no(
        Criterion::Uc,
        budget.used(),
        "no exception set and linearization form a recognized word",
    ))
}
