//! Visibility relations and the checkers that search for them.
//!
//! A visibility assignment is represented during search by `W(e)`, the set
//! of updates visible to each event, as a bitmask over the history's
//! updates. Along a process chain `W` only grows (growth), every event sees
//! its own earlier updates (containment of program order) and repeating
//! queries see every update (eventual delivery). Queries never need to be
//! visible to other processes, so only update-to-event edges are chosen.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::adt::{consistent_state, AdtSpec, Operation, SetSpec, StateSearch, Value};
use crate::history::{Event, EventId, History};

use super::{conclude, Budget, CheckConfig, CheckError, Criterion, Halt, Verdict, ViewState, Witness};

/// A visibility relation as an explicit set of `(from, to)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VisibilityAssignment {
    pairs: BTreeSet<(EventId, EventId)>,
}

impl VisibilityAssignment {
    pub fn new(pairs: BTreeSet<(EventId, EventId)>) -> Self {
        VisibilityAssignment { pairs }
    }

    pub fn pairs(&self) -> &BTreeSet<(EventId, EventId)> {
        &self.pairs
    }

    pub fn sees(&self, from: EventId, to: EventId) -> bool {
        self.pairs.contains(&(from, to))
    }

    /// Updates visible to `e`, in id order.
    pub fn visible_updates(&self, h: &History, e: EventId) -> Vec<EventId> {
        h.updates().map(|u| u.id).filter(|u| self.sees(*u, e)).collect()
    }

    pub fn mentions_only(&self, h: &History) -> bool {
        self.pairs.iter().all(|(a, b)| h.contains(*a) && h.contains(*b))
    }

    pub fn is_reflexive(&self, h: &History) -> bool {
        h.ids().all(|e| self.sees(e, e))
    }

    pub fn contains_program_order(&self, h: &History) -> bool {
        h.events()
            .iter()
            .all(|a| h.chain(a.pid).into_iter().all(|b| !h.precedes(a.id, b) || self.sees(a.id, b)))
    }

    /// Acyclic apart from self loops.
    pub fn is_acyclic(&self, h: &History) -> bool {
        let ids: Vec<EventId> = h.ids().collect();
        let pos: BTreeMap<EventId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut succ = vec![Vec::new(); ids.len()];
        let mut indeg = vec![0usize; ids.len()];
        for (a, b) in &self.pairs {
            if a != b {
                if let (Some(&i), Some(&j)) = (pos.get(a), pos.get(b)) {
                    succ[i].push(j);
                    indeg[j] += 1;
                }
            }
        }
        let mut ready: Vec<usize> = (0..ids.len()).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for &j in &succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push(j);
                }
            }
        }
        seen == ids.len()
    }

    /// `e vis e′ ∧ e′ ↦ e″ ⇒ e vis e″`.
    pub fn satisfies_growth(&self, h: &History) -> bool {
        self.pairs.iter().all(|(e, e1)| {
            h.get(*e1).is_some_and(|ev| {
                h.chain(ev.pid)
                    .into_iter()
                    .all(|e2| !h.precedes(*e1, e2) || self.sees(*e, e2))
            })
        })
    }

    /// Every update is visible to every repeating event.
    pub fn satisfies_eventual_delivery(&self, h: &History) -> bool {
        h.updates()
            .all(|u| h.omega_events().all(|q| self.sees(u.id, q.id)))
    }
}

/// Update-indexed bit layout of a history.
pub(crate) struct Layout<'a> {
    pub h: &'a History,
    pub updates: Vec<EventId>,
    pub bit: BTreeMap<EventId, u32>,
    pub chains: Vec<Vec<&'a Event>>,
    pub all: u64,
}

impl<'a> Layout<'a> {
    pub fn new(h: &'a History) -> Result<Self, CheckError> {
        let updates: Vec<EventId> = h.updates().map(|e| e.id).collect();
        if updates.len() > 64 {
            return Err(CheckError::TooManyUpdates(updates.len()));
        }
        let bit = updates.iter().enumerate().map(|(i, id)| (*id, i as u32)).collect();
        let chains = h
            .pids()
            .into_iter()
            .map(|p| h.chain(p).into_iter().map(|id| h.get(id).expect("chain ids exist")).collect())
            .collect();
        let all = if updates.len() == 64 { u64::MAX } else { (1u64 << updates.len()) - 1 };
        Ok(Layout { h, updates, bit, chains, all })
    }

    pub fn mask_of(&self, e: &Event) -> u64 {
        self.bit.get(&e.id).map_or(0, |b| 1u64 << b)
    }

    pub fn ids_of(&self, mask: u64) -> Vec<EventId> {
        self.updates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1u64 << i) != 0)
            .map(|(_, id)| *id)
            .collect()
    }

    /// Updates strictly after position `i` of chain `c`.
    pub fn later_own_updates(&self, c: usize, i: usize) -> u64 {
        self.chains[c][i + 1..].iter().fold(0, |m, e| m | self.mask_of(e))
    }

    /// The relation induced by per-event visible-update masks, closed with
    /// program order and reflexivity.
    pub fn assignment(&self, w: &BTreeMap<EventId, u64>) -> VisibilityAssignment {
        let mut pairs = BTreeSet::new();
        for chain in &self.chains {
            for (i, e) in chain.iter().enumerate() {
                pairs.insert((e.id, e.id));
                for later in &chain[i + 1..] {
                    pairs.insert((e.id, later.id));
                }
                for u in self.ids_of(w[&e.id]) {
                    pairs.insert((u, e.id));
                }
            }
        }
        VisibilityAssignment::new(pairs)
    }
}

/// Supersets of `lower` drawn from `lower | free`, smallest first.
pub(crate) fn supersets(lower: u64, free: u64) -> impl Iterator<Item = u64> {
    let free = free & !lower;
    let mut sub = Some(0u64);
    std::iter::from_fn(move || {
        let cur = sub?;
        let next = (cur | !free).wrapping_add(1) & free;
        sub = (next != 0).then_some(next);
        Some(lower | cur)
    })
}

/// Strong eventual consistency: some visibility relation makes queries
/// that see the same updates agree on one state.
///
/// Only update sets seen by some query are given a state; sets no query
/// realizes are left unconstrained.
pub fn check_sec(h: &History, spec: &dyn AdtSpec, cfg: &CheckConfig) -> Result<Verdict, CheckError> {
    let layout = Layout::new(h)?;
    let mut budget = Budget::new(cfg.budget);
    let outcome = VisSearch::new(&layout, spec, None, &mut budget).run(Criterion::Sec);
    conclude(Criterion::Sec, &budget, outcome)
}

/// Strong eventual consistency for the insert-wins set: SEC where, for
/// every read and element `x`, `x` is present iff some visible `I(x)` is
/// not visible to any visible `D(x)`.
pub fn check_iw_sec(h: &History, cfg: &CheckConfig) -> Result<Verdict, CheckError> {
    let universe = set_universe(h)?;
    let spec = SetSpec::new(universe.iter().cloned());
    let layout = Layout::new(h)?;
    let mut budget = Budget::new(cfg.budget);
    let outcome = VisSearch::new(&layout, &spec, Some(universe), &mut budget).run(Criterion::IwSec);
    conclude(Criterion::IwSec, &budget, outcome)
}

/// Every element mentioned by an update or a read, after checking that `h`
/// only contains set operations.
pub(crate) fn set_universe(h: &History) -> Result<BTreeSet<Value>, CheckError> {
    let mut universe = BTreeSet::new();
    for e in h.events() {
        let op = &e.label;
        match (op.name(), op.args(), op.returned()) {
            ("I" | "D", [v], None) => {
                universe.insert(v.clone());
            }
            ("R", [], Some(Value::Set(s))) => universe.extend(s.iter().cloned()),
            _ => return Err(CheckError::NotASetHistory(format!("{} is not a set operation", op))),
        }
    }
    Ok(universe)
}

/// The insert-wins equation for one read whose visible updates are
/// `visible`, with `sees(u, u′)` the update-to-update visibility.
pub(crate) fn insert_wins_holds(
    h: &History,
    universe: &BTreeSet<Value>,
    read: &Operation,
    visible: &[EventId],
    sees: impl Fn(EventId, EventId) -> bool,
) -> bool {
    let Some(Value::Set(contents)) = read.returned() else {
        return false;
    };
    let with = |name: &str, x: &Value| -> Vec<EventId> {
        visible
            .iter()
            .copied()
            .filter(|u| {
                let l = &h.get(*u).expect("visible ids exist").label;
                l.name() == name && l.args().first() == Some(x)
            })
            .collect()
    };
    universe.iter().all(|x| {
        let deletes = with("D", x);
        let present = with("I", x)
            .into_iter()
            .any(|i| deletes.iter().all(|d| !sees(i, *d)));
        present == contents.contains(x)
    })
}

struct VisSearch<'a, 'b> {
    layout: &'a Layout<'a>,
    spec: &'a dyn AdtSpec,
    /// Element universe when checking the insert-wins equation.
    insert_wins: Option<BTreeSet<Value>>,
    context: Vec<Operation>,
    slots: Vec<(usize, usize)>,
    w: BTreeMap<EventId, u64>,
    groups: BTreeMap<u64, Vec<&'a Operation>>,
    budget: &'b mut Budget,
}

impl<'a, 'b> VisSearch<'a, 'b> {
    fn new(
        layout: &'a Layout<'a>,
        spec: &'a dyn AdtSpec,
        insert_wins: Option<BTreeSet<Value>>,
        budget: &'b mut Budget,
    ) -> Self {
        let slots = layout
            .chains
            .iter()
            .enumerate()
            .flat_map(|(c, chain)| (0..chain.len()).map(move |i| (c, i)))
            .collect();
        VisSearch {
            layout,
            spec,
            insert_wins,
            context: layout.h.updates().map(|e| e.label.clone()).collect(),
            slots,
            w: BTreeMap::new(),
            groups: BTreeMap::new(),
            budget,
        }
    }

    fn run(mut self, criterion: Criterion) -> Result<Verdict, Halt> {
        if self.dfs(0)? {
            let mut states = Vec::new();
            for (mask, queries) in &self.groups {
                if queries.is_empty() {
                    continue;
                }
                let StateSearch::Found(state) =
                    consistent_state(self.spec, queries, &self.context, self.budget.remaining())?
                else {
                    unreachable!("groups are kept consistent during search");
                };
                states.push(ViewState { visible: self.layout.ids_of(*mask), state });
            }
            let vis = self.layout.assignment(&self.w);
            Ok(Verdict::yes(
                criterion,
                Witness::Visibility { vis, states, order: None },
                self.budget.used(),
                format!("visibility found with {} distinct views", states_len(&self.groups)),
            ))
        } else {
            let what = if self.insert_wins.is_some() {
                "no visibility relation satisfies strong convergence and the insert-wins equation"
            } else {
                "no visibility relation lets queries with equal views agree on a state"
            };
            Ok(Verdict::no(criterion, self.budget.used(), what))
        }
    }

    fn group_consistent(&mut self, mask: u64) -> Result<bool, Halt> {
        let queries = &self.groups[&mask];
        Ok(matches!(
            consistent_state(self.spec, queries, &self.context, self.budget.remaining())?,
            StateSearch::Found(_)
        ))
    }

    fn try_query(&mut self, slot: usize, e: &'a Event, mask: u64) -> Result<bool, Halt> {
        self.w.insert(e.id, mask);
        self.groups.entry(mask).or_default().push(&e.label);
        let found = self.group_consistent(mask)? && self.dfs(slot + 1)?;
        if !found {
            self.groups.get_mut(&mask).expect("just pushed").pop();
            self.w.remove(&e.id);
        }
        Ok(found)
    }

    fn dfs(&mut self, slot: usize) -> Result<bool, Halt> {
        self.budget.tick()?;
        let Some(&(c, i)) = self.slots.get(slot) else {
            return self.leaf();
        };
        let layout = self.layout;
        let e = layout.chains[c][i];
        let prev = if i == 0 { 0 } else { self.w[&layout.chains[c][i - 1].id] };
        if e.is_query() {
            if e.repeats_forever {
                return self.try_query(slot, e, layout.all);
            }
            let allowed = layout.all & !layout.later_own_updates(c, i);
            for mask in supersets(prev, allowed) {
                if self.try_query(slot, e, mask)? {
                    return Ok(true);
                }
            }
            return Ok(false);
        }
        let base = prev | layout.mask_of(e);
        let extra_pool = self.extra_candidates(c, e) & !base;
        for mask in supersets(base, extra_pool) {
            self.w.insert(e.id, mask);
            if self.dfs(slot + 1)? {
                return Ok(true);
            }
        }
        self.w.remove(&e.id);
        Ok(false)
    }

    /// For insert-wins checking, a deletion of `x` may additionally see
    /// insertions of `x` from other processes.
    fn extra_candidates(&self, c: usize, e: &Event) -> u64 {
        if self.insert_wins.is_none() || e.label.name() != "D" {
            return 0;
        }
        let x = e.label.args().first();
        let mut pool = 0;
        for (oc, chain) in self.layout.chains.iter().enumerate() {
            if oc == c {
                continue;
            }
            for u in chain {
                if u.label.name() == "I" && u.label.args().first() == x {
                    pool |= self.layout.mask_of(u);
                }
            }
        }
        pool
    }

    fn leaf(&mut self) -> Result<bool, Halt> {
        let vis = self.layout.assignment(&self.w);
        if !vis.is_acyclic(self.layout.h) {
            return Ok(false);
        }
        if let Some(universe) = &self.insert_wins {
            let h = self.layout.h;
            for q in h.queries() {
                let visible = self.layout.ids_of(self.w[&q.id]);
                let w = &self.w;
                let layout = self.layout;
                let sees = |a: EventId, b: EventId| w[&b] & layout.bit.get(&a).map_or(0, |x| 1u64 << x) != 0;
                if !insert_wins_holds(h, universe, &q.label, &visible, sees) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn states_len(groups: &BTreeMap<u64, Vec<&Operation>>) -> usize {
    groups.values().filter(|g| !g.is_empty()).count()
}
