//! The five reference histories over a shared set of integers, used as
//! golden fixtures for the checkers.
//!
//! | name    | classification      |
//! |---------|---------------------|
//! | `fig1a` | EC, not SEC, not UC |
//! | `fig1b` | SEC, not UC         |
//! | `fig1c` | SEC and UC, not SUC |
//! | `fig1d` | SUC, not PC         |
//! | `fig2`  | PC, not EC          |

use crate::adt::set_ops::{delete, insert, read};
use crate::adt::SetSpec;
use crate::history::History;
use crate::simnet::Scenario;

pub const NAMES: [&str; 5] = ["fig1a", "fig1b", "fig1c", "fig1d", "fig2"];

/// The set specification the fixtures are written against.
pub fn spec() -> SetSpec {
    SetSpec::of_ints([1, 2, 3])
}

/// Names of the bundled simulation scenarios.
pub const SCENARIO_NAMES: [&str; 1] = ["fig1b-scenario"];

pub fn scenario_by_name(name: &str) -> Option<Scenario> {
    (name == "fig1b-scenario").then(fig1b_scenario)
}

/// Two processes each insert one element and delete the other's, and no
/// message crosses before both have finished updating.
pub fn fig1b_scenario() -> Scenario {
    Scenario::scripted(vec![
        vec![insert(1).into(), delete(2).into()],
        vec![insert(2).into(), delete(1).into()],
    ])
    .with_delay(5, 5)
}

pub fn by_name(name: &str) -> Option<History> {
    match name {
        "fig1a" => Some(fig1a()),
        "fig1b" => Some(fig1b()),
        "fig1c" => Some(fig1c()),
        "fig1d" => Some(fig1d()),
        "fig2" => Some(fig2()),
        _ => None,
    }
}

/// Both processes read each other's insertion, then converge on ∅.
pub fn fig1a() -> History {
    History::builder()
        .process(1, [insert(1), read(&[2]), read(&[1])])
        .omega(1, read(&[]))
        .process(2, [insert(2), read(&[1]), read(&[2])])
        .omega(2, read(&[]))
        .build()
        .expect("well-formed fixture")
}

/// Crossed insert/delete pairs converging on {1,2}.
pub fn fig1b() -> History {
    History::builder()
        .process(1, [insert(1), delete(2)])
        .omega(1, read(&[1, 2]))
        .process(2, [insert(2), delete(1)])
        .omega(2, read(&[1, 2]))
        .build()
        .expect("well-formed fixture")
}

/// p1 reads ∅ right after inserting 1.
pub fn fig1c() -> History {
    History::builder()
        .process(1, [insert(1), read(&[])])
        .omega(1, read(&[1, 2]))
        .process(2, [insert(2)])
        .omega(2, read(&[1, 2]))
        .build()
        .expect("well-formed fixture")
}

/// p2 observes the insertion of 2 before that of 1.
pub fn fig1d() -> History {
    History::builder()
        .process(1, [insert(1), read(&[1]), insert(2)])
        .omega(1, read(&[1, 2]))
        .process(2, [read(&[2])])
        .omega(2, read(&[1, 2]))
        .build()
        .expect("well-formed fixture")
}

/// Each process has a legal local view but they stabilize on different
/// states.
pub fn fig2() -> History {
    History::builder()
        .process(1, [insert(1), insert(3), read(&[1, 3]), read(&[1, 2, 3])])
        .omega(1, read(&[1, 2]))
        .process(2, [insert(2), delete(3), read(&[2]), read(&[1, 2])])
        .omega(2, read(&[1, 2, 3]))
        .build()
        .expect("well-formed fixture")
}
