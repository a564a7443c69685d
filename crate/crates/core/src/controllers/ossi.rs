//! Offline optimum of the ergodic program: one allocation per state that
//! minimizes expected cost subject to expected service covering the mean
//! arrival rates.
//!
//! The program is solved as a single structured QP (one block per state,
//! one coupling row per job class) by the interior-point method; the
//! multipliers of the coupling rows are the optimal rate prices `mu*`.

use serde::{Deserialize, Serialize};

use crate::model::{serve_rates, slot_cost, Allocation, ModelError, SystemState, Topology};
use crate::solver::ipm::{self, Block, CouplingRow, IpmSettings, IpmStatus, StructuredQp};
use crate::solver::program::{build_block, BlockMap, BlockSpec};
use crate::solver::{repair, SlotProblem};

use super::{ControlError, Controller, SlotContext};

/// A finite set of states with their stationary probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub states: Vec<SystemState>,
    pub probs: Vec<f64>,
}

impl StateDistribution {
    pub fn new(states: Vec<SystemState>, probs: Vec<f64>) -> Result<Self, ModelError> {
        let d = Self { states, probs };
        d.check()?;
        Ok(d)
    }

    pub fn uniform(states: Vec<SystemState>) -> Result<Self, ModelError> {
        let n = states.len();
        Self::new(states, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.states.is_empty() {
            return Err(ModelError::Invalid("state distribution: no states".into()));
        }
        if self.probs.len() != self.states.len() {
            return Err(ModelError::Dimension {
                what: "state probabilities",
                expected: self.states.len(),
                got: self.probs.len(),
            });
        }
        if self.probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(ModelError::Invalid("state probabilities must be >= 0".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 * self.probs.len().max(1) as f64 {
            return Err(ModelError::Invalid(format!("state probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn validate(&self, topo: &Topology) -> Result<(), ModelError> {
        self.check()?;
        for s in &self.states {
            s.validate(topo)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OssiPolicy {
    /// One allocation per state of the distribution.
    pub allocations: Vec<Allocation>,
    /// Expected per-slot cost `g_e*`, including idle and DSJ energy.
    pub optimal_cost: f64,
    pub mu_star: Vec<f64>,
    /// `Σ_ω π_ω R_j(S^ω)`.
    pub expected_service: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

const IPM: IpmSettings = IpmSettings {
    max_iter: 300,
    tol_feas: 1e-11,
    tol_gap: 1e-11,
};

fn check_inputs(dist: &StateDistribution, topo: &Topology, lambda: &[f64]) -> Result<(), ControlError> {
    dist.validate(topo)?;
    if lambda.len() != topo.n_jobs() {
        return Err(ControlError::Invalid(format!(
            "{} arrival rates for {} job classes",
            lambda.len(),
            topo.n_jobs()
        )));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(ControlError::Invalid("arrival rates must be finite and >= 0".into()));
    }
    Ok(())
}

/// `-Σ_ω π_ω R_j(S^ω) / λ_j` over the capacity variables of every block.
fn rate_rows(
    dist: &StateDistribution,
    topo: &Topology,
    lambda: &[f64],
    maps: &[Option<BlockMap>],
) -> Vec<(usize, CouplingRow)> {
    let mut rows = Vec::new();
    for (j, &l) in lambda.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let mut terms = Vec::new();
        for (b, map) in maps.iter().enumerate() {
            let Some(map) = map else { continue };
            for (local, &(k, d)) in map.vars.iter().enumerate() {
                let slot = topo.vars()[k];
                if slot.job == j {
                    terms.push((b, local, -dist.probs[b] * slot.rate * d / l));
                }
            }
        }
        rows.push((j, CouplingRow { terms, h: -1.0 }));
    }
    rows
}

/// Largest `θ` for which expected service can cover `θ λ` (capped at 2).
pub fn max_scaling(dist: &StateDistribution, topo: &Topology, lambda: &[f64]) -> Result<f64, ControlError> {
    check_inputs(dist, topo, lambda)?;
    if lambda.iter().all(|&l| l == 0.0) {
        return Ok(2.0);
    }
    let mut blocks = Vec::new();
    let mut maps = Vec::new();
    for (state, &p) in dist.states.iter().zip(&dist.probs) {
        if p > 0.0 {
            let (block, map) = build_block(
                state,
                topo,
                &BlockSpec {
                    cost_scale: 1.0,
                    weights: None,
                    caps: None,
                    prune_by_reward: false,
                    costs: false,
                },
            );
            blocks.push(block);
            maps.push(Some(map));
        } else {
            blocks.push(Block::new(0));
            maps.push(None);
        }
    }
    let theta_block = blocks.len();
    let mut tb = Block::new(1);
    tb.q[0] = -1.0;
    tb.push_row(vec![(0, -1.0)], 0.0);
    tb.push_row(vec![(0, 1.0)], 2.0);
    blocks.push(tb);
    let coupling = rate_rows(dist, topo, lambda, &maps)
        .into_iter()
        .map(|(_, mut row)| {
            row.terms.push((theta_block, 0, 1.0));
            row.h = 0.0;
            row
        })
        .collect();
    let res = ipm::solve(&StructuredQp { blocks, coupling }, &IPM);
    if res.status != IpmStatus::Solved && res.residual() > 1e-7 {
        return Err(ControlError::NotConverged {
            iterations: res.iterations,
            residual: res.residual(),
        });
    }
    Ok(res.x[theta_block][0].clamp(0.0, 2.0))
}

/// Solves the ergodic program for arrival rates `lambda`.
///
/// Fails with [`ControlError::Infeasible`] when no policy can serve
/// `lambda` on average, reporting the largest sustainable scaling.
pub fn ossi_solve(
    dist: &StateDistribution,
    topo: &Topology,
    lambda: &[f64],
    tol: f64,
) -> Result<OssiPolicy, ControlError> {
    check_inputs(dist, topo, lambda)?;
    if lambda.iter().any(|&l| l > 0.0) {
        let theta = max_scaling(dist, topo, lambda)?;
        if theta < 1.0 - 1e-9 {
            return Err(ControlError::Infeasible { theta_max: theta });
        }
    }
    let mut blocks = Vec::new();
    let mut maps = Vec::new();
    for (state, &p) in dist.states.iter().zip(&dist.probs) {
        if p > 0.0 {
            let (block, map) = build_block(
                state,
                topo,
                &BlockSpec {
                    cost_scale: p,
                    weights: None,
                    caps: None,
                    prune_by_reward: false,
                    costs: true,
                },
            );
            blocks.push(block);
            maps.push(Some(map));
        } else {
            blocks.push(Block::new(0));
            maps.push(None);
        }
    }
    // put every block's objective on one common scale
    let global = maps
        .iter()
        .flatten()
        .map(|m| m.obj_scale)
        .fold(0.0, f64::max);
    let global = if global > 0.0 { global } else { 1.0 };
    for (block, map) in blocks.iter_mut().zip(&maps) {
        if let Some(map) = map {
            let f = map.obj_scale / global;
            block.p.iter_mut().for_each(|x| *x *= f);
            block.q.iter_mut().for_each(|x| *x *= f);
        }
    }
    let rows = rate_rows(dist, topo, lambda, &maps);
    let row_jobs: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let coupling = rows.into_iter().map(|r| r.1).collect();
    let settings = IpmSettings {
        tol_gap: IPM.tol_gap.min(tol),
        ..IPM
    };
    let res = ipm::solve(&StructuredQp { blocks, coupling }, &settings);
    let converged = res.status == IpmStatus::Solved
        || (res.res_primal <= 1e-8 && res.res_dual <= 1e-8 && res.rel_gap <= tol);
    if !converged {
        return Err(ControlError::NotConverged {
            iterations: res.iterations,
            residual: res.residual(),
        });
    }

    let mut allocations = Vec::with_capacity(dist.len());
    let mut optimal_cost = 0.0;
    let mut expected_service = vec![0.0; topo.n_jobs()];
    for (b, state) in dist.states.iter().enumerate() {
        let mut values = vec![0.0; topo.n_vars()];
        if let Some(map) = &maps[b] {
            map.scatter(&res.x[b], &mut values);
        }
        // classes without demand are never worth serving
        for (k, slot) in topo.vars().iter().enumerate() {
            if lambda[slot.job] == 0.0 {
                values[k] = 0.0;
            }
        }
        let mut alloc = Allocation::from_values(topo, values)?;
        let zero = vec![0.0; topo.n_jobs()];
        repair(&SlotProblem::new(state, topo, zero, 1.0), &mut alloc);
        let p = dist.probs[b];
        optimal_cost += p * slot_cost(state, topo, &alloc)?.grand_total;
        for (e, r) in expected_service.iter_mut().zip(serve_rates(topo, &alloc)) {
            *e += p * r;
        }
        allocations.push(alloc);
    }
    let mut mu_star = vec![0.0; topo.n_jobs()];
    for (row, &j) in row_jobs.iter().enumerate() {
        mu_star[j] = global * res.z_coupling[row].max(0.0) / lambda[j];
    }
    Ok(OssiPolicy {
        allocations,
        optimal_cost,
        mu_star,
        expected_service,
        iterations: res.iterations,
        residual: res.residual(),
    })
}

/// Plays the precomputed per-state allocations; needs the state index.
#[derive(Debug, Clone)]
pub struct Ossi {
    pub policy: OssiPolicy,
}

impl Controller for Ossi {
    fn name(&self) -> String {
        "ossi".into()
    }

    fn decide(&mut self, ctx: &SlotContext) -> Result<Allocation, ControlError> {
        let idx = ctx
            .state_index
            .ok_or_else(|| ControlError::Invalid("OSSI needs an ergodic scenario (state index)".into()))?;
        self.policy
            .allocations
            .get(idx)
            .cloned()
            .ok_or_else(|| ControlError::Invalid(format!("state index {idx} outside the OSSI policy")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{serve_rate, IdcSpec, JobClass, PowerModel, ShiftCostModel};
    use crate::solver::{solve_slot, SlotProblem};

    fn single_job(k_max: f64) -> Topology {
        Topology::with_uniform_links(
            vec![IdcSpec { k_max }],
            vec![JobClass {
                origin: 0,
                serving_set: vec![0],
                rates: vec![1.0],
                mean_rate: 0.0,
                arrival_bound: 0.0,
            }],
            PowerModel::default(),
            ShiftCostModel::default(),
        )
        .unwrap()
    }

    fn state(k: f64, s0: f64, price: f64) -> SystemState {
        SystemState {
            active_servers: vec![k],
            prices: vec![price],
            dsj_capacity: vec![s0],
            bandwidth: vec![0.0],
        }
    }

    #[test]
    fn zero_demand_costs_idle_and_dsj_energy() {
        let topo = single_job(10.0);
        let dist = StateDistribution::uniform(vec![state(10.0, 2.0, 1.0), state(8.0, 4.0, 3.0)]).unwrap();
        let pol = ossi_solve(&dist, &topo, &[0.0], 1e-9).unwrap();
        assert!(pol.allocations.iter().all(|a| a.values()[0] == 0.0));
        let expect = 0.5 * (1.0 * (5.0 + 0.5 * 4.0 / 10.0)) + 0.5 * (3.0 * (4.0 + 0.5 * 16.0 / 8.0));
        assert!((pol.optimal_cost - expect).abs() < 1e-12);
    }

    #[test]
    fn single_state_matches_priced_slot_problem() {
        // with one state the rate constraint binds and mu* is the price at
        // which the per-slot problem serves exactly lambda
        let topo = single_job(10.0);
        let s = state(10.0, 2.0, 1.0);
        let dist = StateDistribution::uniform(vec![s.clone()]).unwrap();
        let pol = ossi_solve(&dist, &topo, &[5.0], 1e-10).unwrap();
        assert!((pol.allocations[0].values()[0] - 5.0).abs() < 1e-7);
        // marginal energy at S = 5: 2 * 0.5 * (2 + 5) / 10 = 0.7
        assert!((pol.mu_star[0] - 0.7).abs() < 1e-6);
        let direct = solve_slot(&SlotProblem::new(&s, &topo, pol.mu_star.clone(), 1.0), 1e-10).unwrap();
        assert!((serve_rate(&topo, &direct.allocation, 0) - 5.0).abs() < 1e-5);
    }

    #[test]
    fn cheap_state_takes_the_load() {
        let topo = single_job(10.0);
        let dist = StateDistribution::uniform(vec![state(10.0, 0.0, 1.0), state(10.0, 0.0, 10.0)]).unwrap();
        let pol = ossi_solve(&dist, &topo, &[2.0], 1e-10).unwrap();
        // marginal costs a / 10 and b meet with (a + b) / 2 = 2
        let (a, b) = (pol.allocations[0].values()[0], pol.allocations[1].values()[0]);
        assert!((a - 40.0 / 11.0).abs() < 1e-6, "{a} {b}");
        assert!((b - 4.0 / 11.0).abs() < 1e-6);
        assert!(a > b);
    }

    #[test]
    fn all_load_in_cheap_state_when_the_other_has_a_floor() {
        // DSJ load raises the expensive state's marginal cost at zero above
        // the cheap state's marginal at full service
        let topo = single_job(10.0);
        let dist = StateDistribution::uniform(vec![state(10.0, 0.0, 1.0), state(10.0, 5.0, 10.0)]).unwrap();
        let pol = ossi_solve(&dist, &topo, &[2.0], 1e-10).unwrap();
        assert!((pol.allocations[0].values()[0] - 4.0).abs() < 1e-6);
        assert!(pol.allocations[1].values()[0].abs() < 1e-6);
    }

    #[test]
    fn infeasible_rates_report_scaling() {
        let topo = single_job(10.0);
        let dist = StateDistribution::uniform(vec![state(10.0, 2.0, 1.0), state(10.0, 6.0, 1.0)]).unwrap();
        // expected capacity (8 + 4) / 2 = 6
        match ossi_solve(&dist, &topo, &[12.0], 1e-9) {
            Err(ControlError::Infeasible { theta_max }) => assert!((theta_max - 0.5).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        assert!((max_scaling(&dist, &topo, &[3.0]).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn bad_distribution_is_rejected() {
        assert!(StateDistribution::new(vec![state(1.0, 0.0, 1.0)], vec![0.5]).is_err());
    }
}
