use std::collections::BTreeSet;

use crate::adt::{step, AdtSpec, Value};
use crate::history::{Event, EventId, History, Pid};

use super::{conclude, Budget, CheckConfig, CheckError, Criterion, Halt, Verdict, Witness};

/// Pipelined consistency: for every process, some linearization of all
/// updates together with that process's events is a legal sequential
/// history.
///
/// Repeating queries are expanded into `cfg.omega_k` copies and the last
/// copy must come after every update.
pub fn check_pc(h: &History, spec: &dyn AdtSpec, cfg: &CheckConfig) -> Result<Verdict, CheckError> {
    let mut budget = Budget::new(cfg.budget);
    let outcome = search_pc(h, spec, cfg.omega_k, &mut budget);
    conclude(Criterion::Pc, &budget, outcome)
}

fn search_pc(h: &History, spec: &dyn AdtSpec, k: usize, budget: &mut Budget) -> Result<Verdict, Halt> {
    let ex = h.expand_omega(k)?;
    let total_updates = ex.updates().count();
    let mut words = Vec::new();
    for pid in ex.pids() {
        let mut search = ChainSearch {
            spec,
            chains: local_view(&ex, pid),
            total_updates,
            failed: BTreeSet::new(),
            word: Vec::new(),
            budget: &mut *budget,
        };
        let mut pos = vec![0; search.chains.len()];
        if !search.dfs(&mut pos, 0, spec.initial_state())? {
            return Ok(Verdict::no(
                Criterion::Pc,
                budget.used(),
                format!("no legal linearization of all updates with the events of {pid}"),
            ));
        }
        words.push(search.word);
    }
    Ok(Verdict::yes(
        Criterion::Pc,
        Witness::ChainWords { omega_k: k, words },
        budget.used(),
        "every process has a legal view of all updates",
    ))
}

/// Chains of the events visible to `pid`'s view: its own events and every
/// other process's updates.
fn local_view(ex: &History, pid: Pid) -> Vec<Vec<&Event>> {
    ex.pids()
        .into_iter()
        .map(|p| {
            ex.chain(p)
                .into_iter()
                .map(|id| ex.get(id).expect("chain ids exist"))
                .filter(|e| p == pid || e.is_update())
                .collect::<Vec<_>>()
        })
        .filter(|c| !c.is_empty())
        .collect()
}

struct ChainSearch<'a, 'b> {
    spec: &'a dyn AdtSpec,
    chains: Vec<Vec<&'a Event>>,
    total_updates: usize,
    failed: BTreeSet<(Vec<usize>, Value)>,
    word: Vec<EventId>,
    budget: &'b mut Budget,
}

impl ChainSearch<'_, '_> {
    fn dfs(&mut self, pos: &mut Vec<usize>, placed_updates: usize, state: Value) -> Result<bool, Halt> {
        self.budget.tick()?;
        if pos.iter().zip(&self.chains).all(|(p, c)| *p == c.len()) {
            return Ok(true);
        }
        let key = (pos.clone(), state);
        if self.failed.contains(&key) {
            return Ok(false);
        }
        let state = &key.1;
        for c in 0..self.chains.len() {
            let Some(e) = self.chains[c].get(pos[c]).copied() else {
                continue;
            };
            let is_tail = e.omega_copy.is_some_and(|o| o.is_last());
            if is_tail && placed_updates < self.total_updates {
                continue;
            }
            let Some(next) = step(self.spec, state, &e.label)? else {
                continue;
            };
            pos[c] += 1;
            self.word.push(e.id);
            if self.dfs(pos, placed_updates + e.is_update() as usize, next)? {
                return Ok(true);
            }
            self.word.pop();
            pos[c] -= 1;
        }
        self.failed.insert(key);
        Ok(false)
    }
}
