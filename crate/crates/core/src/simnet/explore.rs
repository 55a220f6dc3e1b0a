use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Algo, Engine, InFlight, RunRecord, Scenario, ScriptOp, SimError};

/// One step of an explored schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Step {
    /// The next local action of a process: its next operation, or its crash.
    Local(u32),
    /// Delivery of the `k`-th pending message on link `from → to`.
    Deliver { from: u32, to: u32, k: usize },
}

/// What a process observes locally; two schedules with equal local views
/// at every process produce the same record up to timing.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Seen {
    Op(usize),
    Recv(u32, usize),
    Crash,
}

#[derive(Clone)]
struct State {
    pos: Vec<usize>,
    crashed: Vec<bool>,
    links: BTreeMap<(u32, u32), VecDeque<usize>>,
    views: Vec<Vec<Seen>>,
}

/// Runs `sc` under every delivery interleaving the scenario's link
/// discipline allows, ignoring its delay model.
///
/// Interleavings that give every process the same local sequence of
/// operations and receptions are merged, keeping the first in the
/// enumeration order. Fails once more than `bound` interleavings have
/// been enumerated.
pub fn schedule_space(sc: &Scenario, algo: &Algo, bound: u64) -> Result<Vec<RunRecord>, SimError> {
    let spec = algo.spec(sc.support.as_ref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let scripts = sc.scripts(&*spec, &mut rng)?;
    let n = scripts.len();
    let mut explorer = Explorer {
        scripts: &scripts,
        crashes: sc.crashes.iter().map(|(p, k)| (*p, *k)).collect(),
        fifo: sc.fifo,
        bound,
        raw: 0,
        seen: BTreeSet::new(),
        kept: Vec::new(),
        path: Vec::new(),
    };
    let start = State {
        pos: vec![0; n],
        crashed: vec![false; n],
        links: BTreeMap::new(),
        views: vec![Vec::new(); n],
    };
    explorer.dfs(start)?;
    let kept = std::mem::take(&mut explorer.kept);
    kept.iter()
        .map(|schedule| replay(sc, algo, &scripts, schedule))
        .collect()
}

struct Explorer<'a> {
    scripts: &'a [Vec<ScriptOp>],
    crashes: BTreeMap<u32, usize>,
    fifo: bool,
    bound: u64,
    raw: u64,
    seen: BTreeSet<Vec<Vec<Seen>>>,
    kept: Vec<Vec<Step>>,
    path: Vec<Step>,
}

impl Explorer<'_> {
    fn steps(&self, st: &State) -> Vec<Step> {
        let mut out = Vec::new();
        for i in 0..self.scripts.len() {
            let pid = i as u32 + 1;
            let crash_due = self.crashes.get(&pid) == Some(&st.pos[i]);
            if !st.crashed[i] && (crash_due || st.pos[i] < self.scripts[i].len()) {
                out.push(Step::Local(pid));
            }
        }
        for (&(from, to), queue) in &st.links {
            let choices = if self.fifo { queue.len().min(1) } else { queue.len() };
            out.extend((0..choices).map(|k| Step::Deliver { from, to, k }));
        }
        out
    }

    fn apply(&self, st: &mut State, step: Step) {
        match step {
            Step::Local(pid) => {
                let i = pid as usize - 1;
                if self.crashes.get(&pid) == Some(&st.pos[i]) {
                    st.crashed[i] = true;
                    st.views[i].push(Seen::Crash);
                    st.links.retain(|(_, to), _| *to != pid);
                    return;
                }
                let k = st.pos[i];
                st.pos[i] += 1;
                st.views[i].push(Seen::Op(k));
                if self.scripts[i][k].is_update() {
                    for to in 1..=self.scripts.len() as u32 {
                        if to != pid && !st.crashed[to as usize - 1] {
                            st.links.entry((pid, to)).or_default().push_back(k);
                        }
                    }
                }
            }
            Step::Deliver { from, to, k } => {
                let queue = st.links.get_mut(&(from, to)).expect("step comes from a pending link");
                let msg = queue.remove(k).expect("pending message");
                if queue.is_empty() {
                    st.links.remove(&(from, to));
                }
                st.views[to as usize - 1].push(Seen::Recv(from, msg));
            }
        }
    }

    fn dfs(&mut self, st: State) -> Result<(), SimError> {
        let steps = self.steps(&st);
        if steps.is_empty() {
            self.raw += 1;
            if self.raw > self.bound {
                return Err(SimError::BudgetExceeded(self.bound));
            }
            if self.seen.insert(st.views) {
                self.kept.push(self.path.clone());
            }
            return Ok(());
        }
        for step in steps {
            let mut next = st.clone();
            self.apply(&mut next, step);
            self.path.push(step);
            self.dfs(next)?;
            self.path.pop();
        }
        Ok(())
    }
}

/// Executes one explored schedule; step `t` happens at time `t`.
fn replay(sc: &Scenario, algo: &Algo, scripts: &[Vec<ScriptOp>], schedule: &[Step]) -> Result<RunRecord, SimError> {
    let spec = algo.spec(sc.support.as_ref())?;
    let mut engine = Engine::new(sc, algo, spec);
    let mut pos = vec![0usize; scripts.len()];
    let mut links: BTreeMap<(u32, u32), VecDeque<InFlight>> = BTreeMap::new();
    for (t, step) in schedule.iter().enumerate() {
        let time = t as u64;
        match *step {
            Step::Local(pid) => {
                let i = pid as usize - 1;
                if sc.crashes.get(&pid) == Some(&pos[i]) {
                    engine.crash(time, pid);
                    links.retain(|(_, to), _| *to != pid);
                    continue;
                }
                let op = &scripts[i][pos[i]];
                pos[i] += 1;
                if let Some(msg) = engine.invoke(time, pid, op)? {
                    for to in 1..=scripts.len() as u32 {
                        if to != pid && !engine.crashed(to) {
                            links.entry((pid, to)).or_default().push_back(msg.clone());
                        }
                    }
                }
            }
            Step::Deliver { from, to, k } => {
                let queue = links.get_mut(&(from, to)).expect("schedule was explored");
                let msg = queue.remove(k).expect("schedule was explored");
                engine.deliver(time, to, &msg)?;
            }
        }
    }
    engine.quiesce(schedule.len() as u64)?;
    engine.finish()
}
