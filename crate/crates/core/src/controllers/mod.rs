//! Control policies: the stochastic-subgradient controller (SSTF), the
//! queue-weighted drift-plus-penalty controller (QTF), the best-effort
//! baseline (BES) and the offline ergodic optimum (OSSI), plus the
//! performance-bound constants for QTF.

mod bes;
mod bounds;
mod ossi;
mod qtf;
mod sstf;

pub use bes::{bes_step, water_fill, Bes};
pub use bounds::{bound_report, drift_bound_constants, drift_constant, BoundReport};
pub use ossi::{max_scaling, ossi_solve, Ossi, OssiPolicy, StateDistribution};
pub use qtf::{qtf_step, Qtf, QtfConfig};
pub use sstf::{sstf_step, Sstf, SstfState};

use thiserror::Error;

use crate::model::{Allocation, ModelError, QueueVector, SystemState, Topology};
use crate::solver::SolveError;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("arrival rates are not sustainable: at most {theta_max:.6} times the requested rates can be served")]
    Infeasible { theta_max: f64 },
    #[error("ergodic program did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// What a controller observes at the start of a slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub t: usize,
    pub state: &'a SystemState,
    /// Index of the state in the scenario's distribution, in ergodic mode.
    pub state_index: Option<usize>,
    pub topo: &'a Topology,
    pub queues: &'a QueueVector,
}

pub trait Controller: Send {
    fn name(&self) -> String;
    fn decide(&mut self, ctx: &SlotContext) -> Result<Allocation, ControlError>;
}
