//! Multi-agent online optimization over a communication graph.
//!
//! Agents play decisions round by round, mix them with neighbours through a
//! doubly-stochastic matrix and are scored by a composite regret that adds a
//! network-disagreement penalty to the usual loss-based regret.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: graphs, mixing matrices, spectral quantities.
//! - [`losses`]: loss families, drifting sequences, brute-force comparators.
//! - [`algorithms`]: OCGD, CONGD and DINOCO round updates, step schedules.
//! - [`oracle`]: exponential perturbations and the grid offline oracle.
//! - [`regret`]: composite values, the regret ledger and bound envelopes.
//! - [`harness`]: configuration, runners, sweeps, reports and plots.

pub mod algorithms;
pub mod harness;
pub mod losses;
pub mod oracle;
pub mod regret;
pub mod search;
pub mod topology;

pub use algorithms::{AgentStates, StepSchedule};
pub use losses::{Domain, LossFamily, LossFunction, LossSequence};
pub use regret::RegretLedger;
pub use topology::{Graph, MixingMatrix, TopologyKind};
