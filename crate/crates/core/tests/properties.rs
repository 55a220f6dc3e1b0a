mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use update_consistency::adt::set_ops::{delete, insert};
use update_consistency::adt::{replay, spec_by_name, AdtSpec, Operation, QueryInput, SetSpec, Support, Value};
use update_consistency::cli::trace::TraceFile;
use update_consistency::criteria::{check, validate_witness, CheckConfig, Criterion};
use update_consistency::history::{EventId, Pid};
use update_consistency::replication::{Envelope, GenericReplica, Payload, Replica, Timestamp};
use update_consistency::simnet::{run, Algo, RunRecord, Scenario, SimEventKind};

fn cfg() -> CheckConfig {
    CheckConfig {
        budget: 5_000_000,
        omega_k: 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hierarchy_and_witnesses(seed in any::<u64>()) {
        let h = common::random_set_history(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let spec = common::set_spec();
        let mut holds = BTreeMap::new();
        for c in Criterion::ALL {
            let v = check(c, &h, &spec, &cfg()).unwrap();
            prop_assert!(v.decided);
            if v.holds {
                prop_assert_eq!(validate_witness(&h, &spec, &v), Ok(true), "{} witness on\n{}", c, h);
            }
            holds.insert(c, v.holds);
        }
        let imply = |a: Criterion, b: Criterion| !holds[&a] || holds[&b];
        prop_assert!(imply(Criterion::Suc, Criterion::Uc));
        prop_assert!(imply(Criterion::Suc, Criterion::Sec));
        prop_assert!(imply(Criterion::Suc, Criterion::IwSec));
        prop_assert!(imply(Criterion::Uc, Criterion::Ec));
        prop_assert!(imply(Criterion::Sec, Criterion::Ec));
    }

    #[test]
    fn traces_round_trip(seed in any::<u64>()) {
        let h = common::random_set_history(&mut ChaCha8Rng::seed_from_u64(seed), 12);
        let trace = TraceFile::from_history("set", Some(Support::Values(vec![1.into(), 2.into()])), &h);
        let parsed = TraceFile::parse(&trace.to_json()).unwrap();
        prop_assert_eq!(&parsed, &trace);
        prop_assert_eq!(parsed.to_history(&*parsed.spec().unwrap()).unwrap(), h);
    }

    /// Drives three generic replicas by hand. Every operation strictly
    /// advances the local clock, an update is stamped above everything its
    /// issuer has received, and once all messages are in every replica
    /// reads the replay of the timestamp-sorted updates.
    #[test]
    fn timestamps_extend_delivery_and_program_order(
        actions in prop::collection::vec((0usize..3, 0u8..4, 1i64..4, any::<prop::sample::Index>()), 0..40)
    ) {
        let spec: Arc<dyn AdtSpec> = Arc::new(SetSpec::of_ints([1, 2, 3]));
        let mut replicas: Vec<GenericReplica> = (1..=3).map(|p| GenericReplica::new(Pid(p), spec.clone())).collect();
        let mut inbox: Vec<Vec<Envelope>> = vec![Vec::new(); 3];
        let mut received: Vec<Timestamp> = vec![Timestamp::ZERO; 3];
        let mut last_clock = [0u64; 3];
        let mut all: Vec<(Timestamp, Operation)> = Vec::new();
        let stamp = |env: &Envelope| match &env.payload {
            Payload::Stamped { ts, op } => (*ts, op.clone()),
            other => panic!("unexpected payload {other:?}"),
        };
        for (i, kind, v, pick) in actions {
            match kind {
                0 | 1 => {
                    let op = if kind == 0 { insert(v) } else { delete(v) };
                    let env = replicas[i].update(&op).unwrap();
                    let (ts, _) = stamp(&env);
                    prop_assert!(ts > received[i]);
                    prop_assert!(ts.clock > last_clock[i]);
                    replicas[i].deliver(&env).unwrap();
                    for (j, q) in inbox.iter_mut().enumerate() {
                        if j != i {
                            q.push(env.clone());
                        }
                    }
                    all.push((ts, op));
                }
                2 => {
                    replicas[i].query(&QueryInput::new("R", vec![])).unwrap();
                    prop_assert!(replicas[i].clock() > last_clock[i]);
                }
                _ => {
                    if !inbox[i].is_empty() {
                        let k = pick.index(inbox[i].len());
                        let env = inbox[i].remove(k);
                        received[i] = received[i].max(stamp(&env).0);
                        replicas[i].deliver(&env).unwrap();
                    }
                }
            }
            last_clock[i] = replicas[i].clock();
        }
        for (r, q) in replicas.iter_mut().zip(&mut inbox) {
            for env in q.drain(..) {
                r.deliver(&env).unwrap();
            }
        }
        all.sort();
        let expected = replay(&*spec, all.iter().map(|(_, op)| op)).unwrap();
        for r in &mut replicas {
            prop_assert_eq!(r.query(&QueryInput::new("R", vec![])).unwrap(), expected.clone());
        }
    }
}

fn survivors(r: &RunRecord) -> BTreeSet<Pid> {
    r.final_states.keys().copied().collect()
}

#[test]
fn runs_deliver_reliably_and_contain_crashes() {
    for seed in 0..150 {
        let sc = common::random_set_scenario(seed);
        for algo in [Algo::Generic("set".into()), Algo::OrSet] {
            let r = run(&sc, &algo).unwrap();
            let h = r.history().unwrap();
            let updates: BTreeSet<EventId> = h.updates().map(|e| e.id).collect();
            for p in survivors(&r) {
                let mut got: Vec<EventId> = r
                    .deliveries
                    .iter()
                    .filter(|e| e.kind == SimEventKind::Deliver && e.pid == p)
                    .map(|e| e.origin.unwrap())
                    .collect();
                got.extend(h.chain(p).into_iter().filter(|id| updates.contains(id)));
                let unique: BTreeSet<EventId> = got.iter().copied().collect();
                assert_eq!(unique.len(), got.len(), "seed {seed}: duplicate delivery to {p}");
                assert_eq!(unique, updates, "seed {seed}: {p} misses updates");
            }
            for (&pid, &at) in &sc.crashes {
                let pid = Pid(pid);
                assert!(!survivors(&r).contains(&pid));
                assert_eq!(h.chain(pid).len(), at, "seed {seed}");
                let crash = r.deliveries.iter().position(|e| e.kind == SimEventKind::Crash && e.pid == pid).unwrap();
                assert!(r.deliveries[crash + 1..].iter().all(|e| e.pid != pid), "seed {seed}: {pid} acts after crashing");
            }
        }
    }
}

/// The insert-wins rule over the visibility the deliveries induce: an
/// element is present iff some insertion of it was seen by no deletion.
#[test]
fn or_set_quiescent_state_is_insert_wins() {
    for seed in 0..150 {
        let sc = common::random_set_scenario(seed);
        let r = run(&sc, &Algo::OrSet).unwrap();
        let h = r.history().unwrap();
        let mut seen: BTreeMap<Pid, BTreeSet<EventId>> = BTreeMap::new();
        let mut views: BTreeMap<EventId, BTreeSet<EventId>> = BTreeMap::new();
        for e in &r.deliveries {
            let s = seen.entry(e.pid).or_default();
            match e.kind {
                SimEventKind::Invoke => {
                    let id = e.event.unwrap();
                    if h.get(id).unwrap().is_update() {
                        views.insert(id, s.clone());
                        s.insert(id);
                    }
                }
                SimEventKind::Deliver => {
                    s.insert(e.origin.unwrap());
                }
                SimEventKind::Crash => {}
            }
        }
        let label = |id: &EventId| &h.get(*id).unwrap().label;
        let expected: BTreeSet<Value> = views
            .keys()
            .filter(|i| label(i).name() == "I")
            .filter(|i| {
                !views
                    .iter()
                    .any(|(d, view)| label(d).name() == "D" && label(d).args() == label(i).args() && view.contains(i))
            })
            .map(|i| label(i).args()[0].clone())
            .collect();
        for (p, state) in &r.final_states {
            assert_eq!(state.as_set(), Some(&expected), "seed {seed}: {p}");
        }
    }
}

#[test]
fn lww_runs_are_update_consistent() {
    let memory = spec_by_name("memory", None).unwrap();
    for seed in 0..40 {
        let sc = Scenario::random(2, 5).with_seed(seed).with_delay(1, 4).with_fifo(seed % 2 == 0);
        let r = run(&sc, &Algo::LwwMemory).unwrap();
        let h = r.history().unwrap();
        let v = check(Criterion::Uc, &h, &*memory, &cfg()).unwrap();
        assert!(v.decided && v.holds, "seed {seed}:\n{h}");
        assert_eq!(validate_witness(&h, &*memory, &v), Ok(true));
    }
}
