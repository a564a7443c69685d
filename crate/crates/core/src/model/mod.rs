//! Domain types and the cost and queue-dynamics formulas.
//!
//! Everything the controllers optimize and everything the simulator records
//! is evaluated through this module: server and datacenter power under even
//! speed sharing, the piecewise-linear link shifting cost, the per-slot cost
//! of an allocation, and the backlog recursion of each delay-tolerant class.

mod allocation;
mod cost;
mod power;
mod queue;
mod shift;
mod state;
mod topology;

pub use allocation::{Allocation, Violation, ViolationKind};
pub use cost::{check_feasible, serve_rate, serve_rates, slot_cost, CostBreakdown, FEASIBILITY_TOL};
pub use power::PowerModel;
pub use queue::{queue_step, QueueVector};
pub use shift::{shift_cost, Segment, ShiftCostModel};
pub use state::SystemState;
pub use topology::{IdcSpec, JobClass, Topology, VarSlot};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("server speed {0} outside [0, 1]")]
    SpeedOutOfRange(f64),
    #[error("{what} must be finite and nonnegative, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("capacity demand {demand} exceeds active capacity {capacity}")]
    DemandExceedsCapacity { demand: f64, capacity: f64 },
    #[error("infeasible allocation: {}", fmt_violations(.0))]
    Infeasible(Vec<Violation>),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid {0}")]
    Invalid(String),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub(crate) fn nonneg(what: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ModelError::Negative { what, value })
    }
}
