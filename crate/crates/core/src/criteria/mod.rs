//! Decision procedures for the consistency criteria.
//!
//! Every checker takes a finite history (with repeating queries flagged)
//! and a specification, and returns a [`Verdict`]. A positive verdict
//! carries a witness that [`validate_witness`] re-checks directly against
//! the criterion's definition, without search.
//!
//! Repeating queries are interpreted as "all but finitely many" instances:
//! non-repeating queries are the finite exceptions a criterion may ignore,
//! and an update must eventually be seen by every repeating query.
//!
//! All searches are exhaustive and bounded by [`CheckConfig::budget`]. When
//! the budget runs out the verdict has `decided = false`; `holds = false`
//! then means "unknown", never "no".

mod ec;
mod pc;
mod suc;
mod uc;
mod visibility;
mod witness;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adt::{AdtError, AdtSpec, Value};
use crate::history::{EventId, History, HistoryError, DEFAULT_LINEARIZATION_BUDGET};

pub use ec::check_ec;
pub use pc::check_pc;
pub use suc::check_suc;
pub use uc::{check_uc, check_uc_oracle};
pub use visibility::{check_iw_sec, check_sec, VisibilityAssignment};
pub use witness::validate_witness;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "EC")]
    Ec,
    #[serde(rename = "SEC")]
    Sec,
    #[serde(rename = "PC")]
    Pc,
    #[serde(rename = "UC")]
    Uc,
    #[serde(rename = "SUC")]
    Suc,
    #[serde(rename = "IW-SEC")]
    IwSec,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::Ec,
        Criterion::Sec,
        Criterion::Pc,
        Criterion::Uc,
        Criterion::Suc,
        Criterion::IwSec,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Ec => "EC",
            Criterion::Sec => "SEC",
            Criterion::Pc => "PC",
            Criterion::Uc => "UC",
            Criterion::Suc => "SUC",
            Criterion::IwSec => "IW-SEC",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == norm || (norm == "IW" && *c == Criterion::IwSec))
            .ok_or_else(|| format!("unknown criterion `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Maximum number of search nodes (or words, for brute-force checkers)
    /// a single checker may explore.
    pub budget: u64,
    /// Copies materialized per repeating event where a checker expands them.
    pub omega_k: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            budget: DEFAULT_LINEARIZATION_BUDGET,
            omega_k: 2,
        }
    }
}

/// The state attributed to one realized set of visible updates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewState {
    pub visible: Vec<EventId>,
    pub state: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// A state satisfying every repeating query.
    State { state: Value },
    /// A linearization of all updates whose final state satisfies every
    /// repeating query.
    UpdateOrder { events: Vec<EventId> },
    /// One accepted word per process over the history expanded with
    /// `omega_k` copies per repeating event.
    ChainWords {
        omega_k: usize,
        words: Vec<Vec<EventId>>,
    },
    /// A visibility relation, the state of each realized view and, for
    /// strong update consistency, a total order containing visibility.
    Visibility {
        vis: VisibilityAssignment,
        states: Vec<ViewState>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<Vec<EventId>>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: Criterion,
    pub holds: bool,
    /// False when the search budget ran out before an answer was found.
    pub decided: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub diagnostics: String,
    /// Search nodes explored.
    pub explored: u64,
}

impl Verdict {
    pub(crate) fn yes(criterion: Criterion, witness: Witness, explored: u64, diag: impl Into<String>) -> Self {
        Verdict {
            criterion,
            holds: true,
            decided: true,
            witness: Some(witness),
            diagnostics: diag.into(),
            explored,
        }
    }

    pub(crate) fn no(criterion: Criterion, explored: u64, diag: impl Into<String>) -> Self {
        Verdict {
            criterion,
            holds: false,
            decided: true,
            witness: None,
            diagnostics: diag.into(),
            explored,
        }
    }

    pub(crate) fn unknown(criterion: Criterion, budget: u64) -> Self {
        Verdict {
            criterion,
            holds: false,
            decided: false,
            witness: None,
            diagnostics: format!("undecided: search budget of {budget} exhausted"),
            explored: budget,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckError {
    #[error(transparent)]
    Adt(#[from] AdtError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("insert-wins checking needs a set history: {0}")]
    NotASetHistory(String),
    #[error("history has {0} updates; at most 64 are supported")]
    TooManyUpdates(usize),
    #[error("malformed witness: {0}")]
    MalformedWitness(String),
}

/// Runs one checker.
pub fn check(
    criterion: Criterion,
    h: &History,
    spec: &dyn AdtSpec,
    cfg: &CheckConfig,
) -> Result<Verdict, CheckError> {
    match criterion {
        Criterion::Ec => check_ec(h, spec, cfg),
        Criterion::Sec => check_sec(h, spec, cfg),
        Criterion::Pc => check_pc(h, spec, cfg),
        Criterion::Uc => check_uc(h, spec, cfg),
        Criterion::Suc => check_suc(h, spec, cfg),
        Criterion::IwSec => check_iw_sec(h, cfg),
    }
}

/// Internal search failure: either the budget ran out or a genuine error.
#[derive(Debug)]
pub(crate) enum Halt {
    Exhausted,
    Error(CheckError),
}

impl<E: Into<CheckError>> From<E> for Halt {
    fn from(e: E) -> Self {
        match e.into() {
            CheckError::Adt(AdtError::BudgetExceeded(_))
            | CheckError::History(HistoryError::BudgetExceeded(_)) => Halt::Exhausted,
            other => Halt::Error(other),
        }
    }
}

#[derive(Debug)]
pub(crate) struct Budget {
    limit: u64,
    used: u64,
}

impl Budget {
    pub(crate) fn new(limit: u64) -> Self {
        Budget { limit, used: 0 }
    }

    pub(crate) fn tick(&mut self) -> Result<(), Halt> {
        if self.used >= self.limit {
            return Err(Halt::Exhausted);
        }
        self.used += 1;
        Ok(())
    }

    pub(crate) fn used(&self) -> u64 {
        self.used
    }

    pub(crate) fn remaining(&self) -> u64 {
        self.limit - self.used
    }
}

/// Converts a search outcome into a verdict.
pub(crate) fn conclude(
    criterion: Criterion,
    budget: &Budget,
    outcome: Result<Verdict, Halt>,
) -> Result<Verdict, CheckError> {
    match outcome {
        Ok(v) => Ok(v),
        Err(Halt::Exhausted) => Ok(Verdict::unknown(criterion, budget.limit)),
        Err(Halt::Error(e)) => Err(e),
    }
}
