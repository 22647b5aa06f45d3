//! Coupled human-robot gait simulation with gait analysis and 1-D
//! statistical parametric mapping.
// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod control;
pub mod coupling;
pub mod error;
pub mod gait;
pub mod human;
pub mod plan;
pub mod record;
pub mod robot;
pub mod scenario;
pub mod sim;
pub mod spm;

pub use error::{Error, Result};
pub use plan::ExperimentPlan;
pub use record::TrialRecord;
pub use scenario::{ScenarioConfig, SimConfig};
pub use sim::{run_trial, Simulation, WorldState};
