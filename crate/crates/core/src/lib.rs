//! Update-query abstract data types, histories of distributed executions,
//! decision procedures for weak consistency criteria, replication
//! algorithms, and a deterministic network simulator to run them.
//!
//! ```
//! use update_consistency::criteria::{check_uc, CheckConfig};
//! use update_consistency::fixtures;
//!
//! let verdict = check_uc(&fixtures::fig1c(), &fixtures::spec(), &CheckConfig::default()).unwrap();
//! assert!(verdict.holds);
//! ```

pub mod adt;
pub mod cli;
pub mod criteria;
pub mod fixtures;
pub mod history;
pub mod replication;
pub mod simnet;
