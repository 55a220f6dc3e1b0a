//! Distributed histories: operation-labelled events ordered by per-process
//! program order.
//!
//! Program order is stored implicitly through `(pid, seq)`: two events are
//! ordered iff they belong to the same process and the first has the smaller
//! sequence number. An event flagged `repeats_forever` stands for a query
//! repeated infinitely often at the end of its process.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adt::Operation;

/// Default bound on the number of words a linearization stream may emit.
pub const DEFAULT_LINEARIZATION_BUDGET: u64 = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u32);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pid(pub u32);

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Marks an event produced by [`History::expand_omega`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OmegaCopy {
    /// Id of the repeated event in the unexpanded history.
    pub source: EventId,
    /// Position of this copy, `0..count`.
    pub index: usize,
    pub count: usize,
}

impl OmegaCopy {
    pub fn is_last(&self) -> bool {
        self.index + 1 == self.count
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub id: EventId,
    pub pid: Pid,
    pub seq: u32,
    pub label: Operation,
    pub repeats_forever: bool,
    pub omega_copy: Option<OmegaCopy>,
}

impl Event {
    pub fn is_update(&self) -> bool {
        self.label.is_update()
    }

    pub fn is_query(&self) -> bool {
        self.label.is_query()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistoryError {
    #[error("event id {0} appears twice")]
    DuplicateId(EventId),
    #[error("process {pid} has two events with sequence number {seq}")]
    DuplicateSeq { pid: Pid, seq: u32 },
    #[error("event {0} repeats forever but is an update")]
    OmegaOnUpdate(EventId),
    #[error("event {0} repeats forever but is not the last of its process")]
    OmegaNotLast(EventId),
    #[error("event {0} is not part of the history")]
    UnknownEvent(EventId),
    #[error("linearization count exceeded the budget of {0}")]
    BudgetExceeded(u64),
    #[error("omega expansion needs at least one copy")]
    ZeroRepetitions,
}

/// A finite history of events whose program order is a union of
/// per-process chains.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct History {
    events: Vec<Event>,
    index: BTreeMap<EventId, usize>,
}

impl History {
    /// Builds a history, checking id and `(pid, seq)` uniqueness and the
    /// placement of repeating events.
    pub fn new(mut events: Vec<Event>) -> Result<History, HistoryError> {
        events.sort_by_key(|e| (e.pid, e.seq));
        let mut index = BTreeMap::new();
        for (i, e) in events.iter().enumerate() {
            if index.insert(e.id, i).is_some() {
                return Err(HistoryError::DuplicateId(e.id));
            }
            if i > 0 && events[i - 1].pid == e.pid && events[i - 1].seq == e.seq {
                return Err(HistoryError::DuplicateSeq {
                    pid: e.pid,
                    seq: e.seq,
                });
            }
            if e.repeats_forever {
                if !e.is_query() {
                    return Err(HistoryError::OmegaOnUpdate(e.id));
                }
                if events.get(i + 1).is_some_and(|n| n.pid == e.pid) {
                    return Err(HistoryError::OmegaNotLast(e.id));
                }
            }
        }
        Ok(History { events, index })
    }

    pub fn builder() -> HistoryBuilder {
        HistoryBuilder::default()
    }

    /// Events in `(pid, seq)` order.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, id: EventId) -> Option<&Event> {
        self.index.get(&id).map(|&i| &self.events[i])
    }

    pub fn event(&self, id: EventId) -> Result<&Event, HistoryError> {
        self.get(id).ok_or(HistoryError::UnknownEvent(id))
    }

    pub fn contains(&self, id: EventId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = EventId> + '_ {
        self.events.iter().map(|e| e.id)
    }

    pub fn updates(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.is_update())
    }

    pub fn queries(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.is_query())
    }

    /// Events flagged as repeating forever.
    pub fn omega_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.repeats_forever)
    }

    pub fn pids(&self) -> Vec<Pid> {
        let mut pids: Vec<Pid> = self.events.iter().map(|e| e.pid).collect();
        pids.dedup();
        pids
    }

    /// Events of one process in program order.
    pub fn chain(&self, pid: Pid) -> Vec<EventId> {
        self.events
            .iter()
            .filter(|e| e.pid == pid)
            .map(|e| e.id)
            .collect()
    }

    /// Strict program order: `a ↦ b`.
    pub fn precedes(&self, a: EventId, b: EventId) -> bool {
        match (self.get(a), self.get(b)) {
            (Some(x), Some(y)) => x.pid == y.pid && x.seq < y.seq,
            _ => false,
        }
    }

    /// The sub-history containing only `keep`, with program order
    /// restricted to it. Ids and sequence numbers are preserved.
    pub fn project_events(&self, keep: &BTreeSet<EventId>) -> History {
        let events: Vec<Event> = self
            .events
            .iter()
            .filter(|e| keep.contains(&e.id))
            .cloned()
            .collect();
        let index = events.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        History { events, index }
    }

    /// The maximal totally ordered subsets of program order: one chain per
    /// process.
    pub fn maximal_chains(&self) -> Vec<Vec<EventId>> {
        self.pids().into_iter().map(|p| self.chain(p)).collect()
    }

    /// Replaces every repeating event by `k` consecutive copies with the
    /// same label. Other events keep their ids; copies get fresh ids above
    /// the current maximum, allocated in `(pid, seq)` order, and consecutive
    /// sequence numbers starting at the repeated event's.
    pub fn expand_omega(&self, k: usize) -> Result<History, HistoryError> {
        if k == 0 {
            return Err(HistoryError::ZeroRepetitions);
        }
        if self.omega_events().next().is_none() {
            return Ok(self.clone());
        }
        let mut next_id = self.index.keys().next_back().map_or(0, |id| id.0 + 1);
        let mut events = Vec::new();
        for e in &self.events {
            if !e.repeats_forever {
                events.push(e.clone());
                continue;
            }
            for index in 0..k {
                events.push(Event {
                    id: EventId(next_id),
                    pid: e.pid,
                    seq: e.seq + index as u32,
                    label: e.label.clone(),
                    repeats_forever: false,
                    omega_copy: Some(OmegaCopy {
                        source: e.id,
                        index,
                        count: k,
                    }),
                });
                next_id += 1;
            }
        }
        History::new(events)
    }

    /// Streams every topological ordering of the events in `subset`, in a
    /// deterministic order. After `budget` words the stream yields
    /// [`HistoryError::BudgetExceeded`] once and stops.
    pub fn linearizations(
        &self,
        subset: &BTreeSet<EventId>,
        budget: u64,
    ) -> Result<Linearizations, HistoryError> {
        for id in subset {
            self.event(*id)?;
        }
        let chains: Vec<Vec<EventId>> = self
            .maximal_chains()
            .into_iter()
            .map(|c| c.into_iter().filter(|id| subset.contains(id)).collect::<Vec<_>>())
            .filter(|c| !c.is_empty())
            .collect();
        Ok(Linearizations::new(chains, budget))
    }

    /// Whether `word` lists each event of `subset` exactly once, in an
    /// order compatible with program order.
    pub fn is_linearization_of(&self, word: &[EventId], subset: &BTreeSet<EventId>) -> bool {
        if word.len() != subset.len() {
            return false;
        }
        let mut seen = BTreeSet::new();
        for (i, a) in word.iter().enumerate() {
            if !subset.contains(a) || !seen.insert(*a) {
                return false;
            }
            if word[..i].iter().any(|b| self.precedes(*a, *b)) {
                return false;
            }
        }
        true
    }

    /// Labels of `word`.
    pub fn labels<'a>(&'a self, word: &'a [EventId]) -> impl Iterator<Item = &'a Operation> + 'a {
        word.iter().map(move |id| &self.events[self.index[id]].label)
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, pid) in self.pids().into_iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{pid}:")?;
            for id in self.chain(pid) {
                let e = self.get(id).expect("chain ids belong to the history");
                write!(f, " {}", e.label)?;
                if e.repeats_forever {
                    f.write_str("^ω")?;
                }
            }
        }
        Ok(())
    }
}

/// Builds histories process by process, assigning ids in `(pid, seq)` order
/// on [`HistoryBuilder::build`].
#[derive(Clone, Debug, Default)]
pub struct HistoryBuilder {
    chains: BTreeMap<Pid, Vec<(Operation, bool)>>,
}

impl HistoryBuilder {
    /// Appends `ops` to the chain of process `pid`.
    pub fn process<I: IntoIterator<Item = Operation>>(mut self, pid: u32, ops: I) -> Self {
        self.chains
            .entry(Pid(pid))
            .or_default()
            .extend(ops.into_iter().map(|o| (o, false)));
        self
    }

    /// Appends an event repeated forever to the chain of process `pid`.
    pub fn omega(mut self, pid: u32, op: Operation) -> Self {
        self.chains.entry(Pid(pid)).or_default().push((op, true));
        self
    }

    pub fn build(self) -> Result<History, HistoryError> {
        let mut events = Vec::new();
        let mut next = 0u32;
        for (pid, ops) in self.chains {
            for (seq, (label, repeats_forever)) in ops.into_iter().enumerate() {
                events.push(Event {
                    id: EventId(next),
                    pid,
                    seq: seq as u32,
                    label,
                    repeats_forever,
                    omega_copy: None,
                });
                next += 1;
            }
        }
        History::new(events)
    }
}

/// A total order on a set of events compatible with program order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Linearization {
    pub word: Vec<EventId>,
}

/// Stream of linearizations; see [`History::linearizations`].
///
/// Words are produced in lexicographic order of the chain chosen at each
/// position, chains being ordered by pid.
#[derive(Clone, Debug)]
pub struct Linearizations {
    chains: Vec<Vec<EventId>>,
    pos: Vec<usize>,
    choices: Vec<usize>,
    total: usize,
    budget: u64,
    emitted: u64,
    started: bool,
    done: bool,
}

impl Linearizations {
    fn new(chains: Vec<Vec<EventId>>, budget: u64) -> Self {
        let total = chains.iter().map(Vec::len).sum();
        Linearizations {
            pos: vec![0; chains.len()],
            chains,
            choices: Vec::with_capacity(total),
            total,
            budget,
            emitted: 0,
            started: false,
            done: false,
        }
    }

    fn first_available(&self, from: usize) -> Option<usize> {
        (from..self.chains.len()).find(|&c| self.pos[c] < self.chains[c].len())
    }

    fn descend(&mut self) {
        while self.choices.len() < self.total {
            let c = self
                .first_available(0)
                .expect("unfinished word has an available chain");
            self.pos[c] += 1;
            self.choices.push(c);
        }
    }

    fn advance(&mut self) -> bool {
        while let Some(c) = self.choices.pop() {
            self.pos[c] -= 1;
            if let Some(next) = self.first_available(c + 1) {
                self.pos[next] += 1;
                self.choices.push(next);
                self.descend();
                return true;
            }
        }
        false
    }

    fn current(&self) -> Linearization {
        let mut cursor = vec![0; self.chains.len()];
        let word = self
            .choices
            .iter()
            .map(|&c| {
                let id = self.chains[c][cursor[c]];
                cursor[c] += 1;
                id
            })
            .collect();
        Linearization { word }
    }
}

impl Iterator for Linearizations {
    type Item = Result<Linearization, HistoryError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let more = if self.started {
            self.advance()
        } else {
            self.started = true;
            self.descend();
            true
        };
        if !more {
            self.done = true;
            return None;
        }
        if self.emitted == self.budget {
            self.done = true;
            return Some(Err(HistoryError::BudgetExceeded(self.budget)));
        }
        self.emitted += 1;
        Some(Ok(self.current()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adt::set_ops::{delete, insert, read};
    use crate::fixtures;
    use proptest::prelude::*;

    fn all(h: &History) -> BTreeSet<EventId> {
        h.ids().collect()
    }

    fn collect(h: &History, subset: &BTreeSet<EventId>) -> Vec<Vec<EventId>> {
        h.linearizations(subset, DEFAULT_LINEARIZATION_BUDGET)
            .unwrap()
            .map(|l| l.unwrap().word)
            .collect()
    }

    // Independent count: filter all permutations of the subset.
    fn brute_force_count(h: &History, subset: &BTreeSet<EventId>) -> usize {
        fn perms(items: &mut Vec<EventId>, k: usize, h: &History, count: &mut usize) {
            if k == items.len() {
                let ok = (0..items.len())
                    .all(|i| (i + 1..items.len()).all(|j| !h.precedes(items[j], items[i])));
                *count += ok as usize;
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                perms(items, k + 1, h, count);
                items.swap(k, i);
            }
        }
        let mut items: Vec<EventId> = subset.iter().copied().collect();
        let mut count = 0;
        perms(&mut items, 0, h, &mut count);
        count
    }

    #[test]
    fn two_unordered_events() {
        let h = History::builder()
            .process(1, [insert(1)])
            .process(2, [insert(2)])
            .build()
            .unwrap();
        assert_eq!(
            collect(&h, &all(&h)),
            vec![vec![EventId(0), EventId(1)], vec![EventId(1), EventId(0)]]
        );
    }

    #[test]
    fn fig1b_updates_have_six_interleavings() {
        let h = fixtures::fig1b();
        let ups: BTreeSet<EventId> = h.updates().map(|e| e.id).collect();
        let words = collect(&h, &ups);
        assert_eq!(words.len(), 6);
        assert_eq!(brute_force_count(&h, &ups), 6);
        let distinct: BTreeSet<_> = words.iter().collect();
        assert_eq!(distinct.len(), 6);
    }

    #[test]
    fn single_chain_has_one_linearization() {
        let h = History::builder()
            .process(1, [insert(1), delete(1), read(&[]), insert(2)])
            .build()
            .unwrap();
        assert_eq!(collect(&h, &all(&h)).len(), 1);
    }

    #[test]
    fn empty_subset_has_the_empty_word() {
        let h = fixtures::fig1a();
        assert_eq!(collect(&h, &BTreeSet::new()), vec![Vec::<EventId>::new()]);
    }

    #[test]
    fn budget_is_loud() {
        let h = fixtures::fig1b();
        let results: Vec<_> = h.linearizations(&all(&h), 3).unwrap().collect();
        assert_eq!(results.len(), 4);
        assert_eq!(results[3], Err(HistoryError::BudgetExceeded(3)));
    }

    #[test]
    fn projections() {
        let h = fixtures::fig1a();
        assert_eq!(h.project_events(&all(&h)), h);
        assert!(h.project_events(&BTreeSet::new()).is_empty());

        let c = fixtures::fig1c();
        let ups: BTreeSet<EventId> = c.updates().map(|e| e.id).collect();
        let p = c.project_events(&ups);
        assert_eq!(p.len(), 2);
        let labels: Vec<_> = p.events().iter().map(|e| e.label.clone()).collect();
        assert_eq!(labels, vec![insert(1), insert(2)]);
        let ids: Vec<_> = p.ids().collect();
        assert!(!p.precedes(ids[0], ids[1]) && !p.precedes(ids[1], ids[0]));
    }

    #[test]
    fn maximal_chains_of_fig2() {
        let h = fixtures::fig2();
        let chains = h.maximal_chains();
        assert_eq!(chains.len(), 2);
        assert!(chains.iter().all(|c| c.len() == 5));
        assert!(History::default().maximal_chains().is_empty());
        let single = History::builder()
            .process(3, [insert(1), read(&[1])])
            .build()
            .unwrap();
        assert_eq!(single.maximal_chains(), vec![all(&single).into_iter().collect::<Vec<_>>()]);
    }

    #[test]
    fn expand_omega_counts() {
        let a = fixtures::fig1a();
        assert_eq!(a.len(), 8);
        let ex = a.expand_omega(2).unwrap();
        assert_eq!(ex.len(), 10);
        assert_eq!(ex.omega_events().count(), 0);
        assert_eq!(ex.events().iter().filter(|e| e.omega_copy.is_some()).count(), 4);

        let one = History::builder()
            .process(1, [insert(1)])
            .omega(1, read(&[1]))
            .build()
            .unwrap();
        let tripled = one.expand_omega(3).unwrap();
        let labels: Vec<_> = tripled.events().iter().map(|e| e.label.to_string()).collect();
        assert_eq!(labels, ["I(1)", "R/{1}", "R/{1}", "R/{1}"]);

        let plain = History::builder().process(1, [insert(1)]).build().unwrap();
        assert_eq!(plain.expand_omega(5).unwrap(), plain);
        assert_eq!(plain.expand_omega(0), Err(HistoryError::ZeroRepetitions));
    }

    #[test]
    fn omega_must_be_a_final_query() {
        let bad = History::builder()
            .omega(1, read(&[]))
            .process(1, [insert(1)])
            .build();
        assert!(matches!(bad, Err(HistoryError::OmegaNotLast(_))));
        let bad = History::builder().omega(1, insert(1)).build();
        assert!(matches!(bad, Err(HistoryError::OmegaOnUpdate(_))));
    }

    fn arb_history() -> impl Strategy<Value = History> {
        prop::collection::vec((1u32..4, any::<bool>(), 1i64..3), 0..8).prop_map(|evs| {
            let mut b = History::builder();
            for (pid, upd, v) in evs {
                b = b.process(pid, [if upd { insert(v) } else { read(&[v]) }]);
            }
            b.build().unwrap()
        })
    }

    proptest! {
        #[test]
        fn enumeration_matches_brute_force(h in arb_history(), mask in any::<u8>()) {
            let subset: BTreeSet<EventId> = h.ids().filter(|id| mask & (1 << (id.0 % 8)) != 0).collect();
            let words = collect(&h, &subset);
            prop_assert_eq!(words.len(), brute_force_count(&h, &subset));
            for w in &words {
                prop_assert!(h.is_linearization_of(w, &subset));
            }
            let distinct: BTreeSet<_> = words.iter().collect();
            prop_assert_eq!(distinct.len(), words.len());
        }

        #[test]
        fn projection_restricts_program_order(h in arb_history(), mask in any::<u8>()) {
            let keep: BTreeSet<EventId> = h.ids().filter(|id| mask & (1 << (id.0 % 8)) != 0).collect();
            let p = h.project_events(&keep);
            prop_assert_eq!(p.len(), keep.len());
            for a in &keep {
                for b in &keep {
                    prop_assert_eq!(p.precedes(*a, *b), h.precedes(*a, *b));
                }
            }
        }
    }
}
