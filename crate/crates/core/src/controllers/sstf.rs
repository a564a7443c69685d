use serde::{Deserialize, Serialize};

use crate::model::{serve_rates, Allocation, SystemState, Topology};
use crate::solver::{solve_slot, SlotProblem, SolveError};

use super::{ControlError, Controller, SlotContext};

/// Multipliers of the rate constraints and the subgradient step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SstfState {
    pub mu: Vec<f64>,
    /// Index `n` of the next step; the step size is `beta0 / n`.
    pub step_index: u64,
    pub lambda: Vec<f64>,
    pub beta0: f64,
}

impl SstfState {
    pub fn new(lambda: Vec<f64>, beta0: f64) -> Result<Self, ControlError> {
        if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(ControlError::Invalid("SSTF rates must be finite and >= 0".into()));
        }
        if !(beta0.is_finite() && beta0 > 0.0) {
            return Err(ControlError::Invalid(format!("SSTF step scale {beta0} must be > 0")));
        }
        Ok(Self {
            mu: vec![0.0; lambda.len()],
            step_index: 1,
            lambda,
            beta0,
        })
    }
}

/// One slot of the stochastic subgradient method: solve the per-state
/// problem at the current prices `mu`, then move each price along
/// `lambda_j - R_j` with step `beta0 / n`, projected onto `mu >= 0`.
pub fn sstf_step(
    state: &SystemState,
    topo: &Topology,
    sstf: &SstfState,
    tol: f64,
) -> Result<(Allocation, SstfState), SolveError> {
    if sstf.mu.len() != topo.n_jobs() || sstf.lambda.len() != topo.n_jobs() {
        return Err(SolveError::Invalid("SSTF state size differs from job count".into()));
    }
    let report = solve_slot(&SlotProblem::new(state, topo, sstf.mu.clone(), 1.0), tol)?;
    let served = serve_rates(topo, &report.allocation);
    let beta = sstf.beta0 / sstf.step_index as f64;
    let mu = sstf
        .mu
        .iter()
        .zip(&sstf.lambda)
        .zip(&served)
        .map(|((&mu, &lambda), &r)| (mu + beta * (lambda - r)).max(0.0))
        .collect();
    Ok((
        report.allocation,
        SstfState {
            mu,
            step_index: sstf.step_index + 1,
            lambda: sstf.lambda.clone(),
            beta0: sstf.beta0,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct Sstf {
    pub state: SstfState,
    pub tol: f64,
}

impl Sstf {
    pub fn new(lambda: Vec<f64>, beta0: f64) -> Result<Self, ControlError> {
        Ok(Self {
            state: SstfState::new(lambda, beta0)?,
            tol: 1e-6,
        })
    }
}

impl Controller for Sstf {
    fn name(&self) -> String {
        "sstf".into()
    }

    fn decide(&mut self, ctx: &SlotContext) -> Result<Allocation, ControlError> {
        let (alloc, next) = sstf_step(ctx.state, ctx.topo, &self.state, self.tol)?;
        self.state = next;
        Ok(alloc)
    }
}
