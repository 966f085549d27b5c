//! Repairing inconsistent fact databases.
//!
//! A set of source databases and first-order integrity constraints is compiled
//! into an abductive theory. An SLDNFA-style derivation engine computes the
//! insertions and retractions that restore consistency, and an optimizer keeps
//! only the preferred ones. The `oracle` module recomputes preferred repairs by
//! brute force over three-valued models and is used to cross-check the engine.

pub mod composer;
pub mod engine;
pub mod frontend;
pub mod logic;
pub mod optimizer;
pub mod oracle;
pub mod transform;

pub use composer::{AbductiveTheory, DatabaseInstance, Repair};
pub use engine::{Budget, DerivationOutcome};
pub use frontend::{parse_problem, run, FrontendError, ProblemFile, RepairReport, RunOptions};
pub use logic::{Atom, Clause, Denial, Literal, Substitution, Term, Var};
pub use optimizer::{PreferenceCriterion, Status};
pub use transform::{DenialTheory, Formula};
