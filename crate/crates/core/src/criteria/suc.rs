use std::collections::BTreeMap;

use crate::adt::{query_holds, replay, AdtSpec, Operation, Value};
use crate::history::{EventId, History};

use super::visibility::{supersets, Layout};
use super::{conclude, Budget, CheckConfig, CheckError, Criterion, Halt, Verdict, ViewState, Witness};

/// Strong update consistency: a visibility relation and a total order
/// containing it such that every query returns the replay, in that order,
/// of the updates it sees.
///
/// The search builds the order of updates one update at a time. Before a
/// process's next update is placed, its pending queries choose their
/// visible updates among those already placed, since a query must precede
/// its own next update. Visible sets only grow along a chain, and a larger
/// set never helps later events, so supersets of a set that failed further
/// down are skipped.
pub fn check_suc(h: &History, spec: &dyn AdtSpec, cfg: &CheckConfig) -> Result<Verdict, CheckError> {
    let layout = Layout::new(h)?;
    let mut budget = Budget::new(cfg.budget);
    let outcome = SucSearch::new(&layout, spec, &mut budget).run();
    conclude(Criterion::Suc, &budget, outcome)
}

struct SucSearch<'a, 'b> {
    layout: &'a Layout<'a>,
    spec: &'a dyn AdtSpec,
    budget: &'b mut Budget,
    order: Vec<EventId>,
    placed: u64,
    pos: Vec<usize>,
    last_w: Vec<u64>,
    w: BTreeMap<EventId, u64>,
}

impl<'a, 'b> SucSearch<'a, 'b> {
    fn new(layout: &'a Layout<'a>, spec: &'a dyn AdtSpec, budget: &'b mut Budget) -> Self {
        let n = layout.chains.len();
        SucSearch {
            layout,
            spec,
            budget,
            order: Vec::new(),
            placed: 0,
            pos: vec![0; n],
            last_w: vec![0; n],
            w: BTreeMap::new(),
        }
    }

    fn run(mut self) -> Result<Verdict, Halt> {
        if !self.place()? {
            return Ok(Verdict::no(
                Criterion::Suc,
                self.budget.used(),
                "no total order of the updates explains every query by the replay of a growing visible set",
            ));
        }
        let mut views: BTreeMap<u64, Value> = BTreeMap::new();
        for q in self.layout.h.queries() {
            let mask = self.w[&q.id];
            if let std::collections::btree_map::Entry::Vacant(slot) = views.entry(mask) {
                slot.insert(self.replay_mask(mask)?);
            }
        }
        let states = views
            .into_iter()
            .map(|(mask, state)| ViewState { visible: self.layout.ids_of(mask), state })
            .collect();
        let order = self.total_order();
        let text = self
            .layout
            .h
            .labels(&self.order)
            .map(|o| o.to_string())
            .collect::<Vec<_>>()
            .join("·");
        Ok(Verdict::yes(
            Criterion::Suc,
            Witness::Visibility { vis: self.layout.assignment(&self.w), states, order: Some(order) },
            self.budget.used(),
            format!("update order {}", if text.is_empty() { "ε" } else { &text }),
        ))
    }

    /// Places the next update of some chain, after resolving the queries
    /// that precede it.
    fn place(&mut self) -> Result<bool, Halt> {
        self.budget.tick()?;
        if self.placed == self.layout.all {
            return self.tail(0);
        }
        for c in 0..self.layout.chains.len() {
            let chain = &self.layout.chains[c];
            if let Some(j) = (self.pos[c]..chain.len()).find(|&j| chain[j].is_update()) {
                let (saved_pos, saved_w) = (self.pos[c], self.last_w[c]);
                if self.queries(c, Some(j))? {
                    return Ok(true);
                }
                self.pos[c] = saved_pos;
                self.last_w[c] = saved_w;
            }
        }
        Ok(false)
    }

    /// Resolves the remaining queries of chains `c..` once every update is
    /// placed.
    fn tail(&mut self, c: usize) -> Result<bool, Halt> {
        if c == self.layout.chains.len() {
            return Ok(true);
        }
        self.queries(c, None)
    }

    /// Resolves queries of chain `c` from its current position up to the
    /// update at `stop` (which is then placed), or to the end of the chain.
    fn queries(&mut self, c: usize, stop: Option<usize>) -> Result<bool, Halt> {
        let layout = self.layout;
        let chain = &layout.chains[c];
        let i = self.pos[c];
        if Some(i) == stop {
            let u = chain[i];
            let mask = self.last_w[c] | layout.mask_of(u);
            self.w.insert(u.id, mask);
            self.order.push(u.id);
            self.placed |= layout.mask_of(u);
            self.pos[c] = i + 1;
            self.last_w[c] = mask;
            if self.place()? {
                return Ok(true);
            }
            self.placed &= !layout.mask_of(u);
            self.order.pop();
            self.w.remove(&u.id);
            self.pos[c] = i;
            self.last_w[c] = mask & !layout.mask_of(u);
            return Ok(false);
        }
        if i == chain.len() {
            return self.tail(c + 1);
        }
        let q = chain[i];
        let saved = self.last_w[c];
        let free = if q.repeats_forever {
            0
        } else if stop.is_some() {
            self.placed
        } else {
            layout.all
        };
        let lower = if q.repeats_forever { layout.all } else { saved };
        let mut failed: Vec<u64> = Vec::new();
        for mask in supersets(lower, free) {
            self.budget.tick()?;
            if failed.iter().any(|f| f & mask == *f) {
                continue;
            }
            let state = self.replay_mask(mask)?;
            if !query_holds(self.spec, &state, &q.label)? {
                continue;
            }
            self.w.insert(q.id, mask);
            self.pos[c] = i + 1;
            self.last_w[c] = mask;
            if self.queries(c, stop)? {
                return Ok(true);
            }
            failed.push(mask);
        }
        self.w.remove(&q.id);
        self.pos[c] = i;
        self.last_w[c] = saved;
        Ok(false)
    }

    /// Replays the updates of `mask` in the order placed so far.
    fn replay_mask(&self, mask: u64) -> Result<Value, Halt> {
        let h = self.layout.h;
        let ops: Vec<&Operation> = self
            .order
            .iter()
            .filter(|id| mask & self.layout.bit.get(id).map_or(0, |b| 1u64 << b) != 0)
            .map(|id| &h.get(*id).expect("placed ids exist").label)
            .collect();
        Ok(replay(self.spec, ops)?)
    }

    /// Interleaves queries into the update order: each query goes right
    /// before its process's next update, or at the end.
    fn total_order(&self) -> Vec<EventId> {
        let layout = self.layout;
        let chain_of: BTreeMap<EventId, usize> = layout
            .chains
            .iter()
            .enumerate()
            .flat_map(|(c, chain)| chain.iter().map(move |e| (e.id, c)))
            .collect();
        let mut next = vec![0usize; layout.chains.len()];
        let mut out = Vec::with_capacity(layout.h.len());
        let mut flush = |c: usize, upto: usize, out: &mut Vec<EventId>| {
            while next[c] < upto {
                out.push(layout.chains[c][next[c]].id);
                next[c] += 1;
            }
        };
        for u in &self.order {
            let c = chain_of[u];
            let at = layout.chains[c].iter().position(|e| e.id == *u).expect("own update");
            flush(c, at + 1, &mut out);
        }
        for c in 0..layout.chains.len() {
            flush(c, layout.chains[c].len(), &mut out);
        }
        out
    }
}
