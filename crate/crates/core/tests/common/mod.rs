//! Shared generators for integration tests.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use update_consistency::adt::set_ops::{delete, insert, read};
use update_consistency::adt::{Operation, SetSpec};
use update_consistency::history::{History, HistoryBuilder};
use update_consistency::simnet::{Scenario, ScriptOp};

pub fn set_spec() -> SetSpec {
    SetSpec::of_ints([1, 2])
}

/// A random set history over `{1, 2}`: 2 or 3 processes and at most
/// `max_events` events. The last event of a process is repeating with
/// probability one half when it is a read.
pub fn random_set_history(rng: &mut ChaCha8Rng, max_events: usize) -> History {
    let procs = rng.gen_range(2..=3u32);
    let total = rng.gen_range(1..=max_events);
    let mut chains: Vec<Vec<Operation>> = vec![Vec::new(); procs as usize];
    for _ in 0..total {
        let p = rng.gen_range(0..procs as usize);
        let v = rng.gen_range(1..=2);
        let op = match rng.gen_range(0..3) {
            0 => insert(v),
            1 => delete(v),
            _ => {
                let contents: Vec<i64> = [1, 2].into_iter().filter(|_| rng.gen_bool(0.5)).collect();
                read(&contents)
            }
        };
        chains[p].push(op);
    }
    let mut b = HistoryBuilder::default();
    for (i, mut chain) in chains.into_iter().enumerate() {
        let pid = i as u32 + 1;
        let omega = match chain.last() {
            Some(last) if last.is_query() && rng.gen_bool(0.5) => chain.pop(),
            _ => None,
        };
        b = b.process(pid, chain);
        if let Some(q) = omega {
            b = b.omega(pid, q);
        }
    }
    b.build().expect("generated histories are well formed")
}

/// The fuzz corpus: `count` histories of at most 8 events from `seed`.
pub fn corpus(seed: u64, count: usize) -> Vec<History> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_set_history(&mut rng, 8)).collect()
}

/// A script of up to `max_updates` updates and `max_queries` reads over
/// `{1, 2, 3}`, shuffled.
pub fn random_set_script(rng: &mut ChaCha8Rng, max_updates: usize, max_queries: usize) -> Vec<Operation> {
    let mut ops = Vec::new();
    for _ in 0..rng.gen_range(0..=max_updates) {
        let v = rng.gen_range(1..=3);
        ops.push(if rng.gen_bool(0.6) { insert(v) } else { delete(v) });
    }
    for _ in 0..rng.gen_range(0..=max_queries) {
        ops.push(read(&[]));
    }
    ops.shuffle(rng);
    ops
}

/// Three processes running `random_set_script`s under random delays and
/// link discipline; half of the scenarios crash one process.
pub fn random_set_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scripts = (0..3)
        .map(|_| random_set_script(&mut rng, 4, 4).into_iter().map(ScriptOp::from).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    let lens: Vec<usize> = scripts.iter().map(Vec::len).collect();
    let max = rng.gen_range(1..=8);
    let mut sc = Scenario::scripted(scripts).with_seed(seed).with_delay(1, max).with_fifo(rng.gen_bool(0.5));
    if rng.gen_bool(0.5) {
        let pid = rng.gen_range(1..=3u32);
        sc = sc.with_crash(pid, rng.gen_range(0..=lens[pid as usize - 1]));
    }
    sc
}
