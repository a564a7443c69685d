//! Per-slot convex program shared by the stochastic-subgradient and
//! queue-based controllers:
//!
//! ```text
//! min  V' [ Σ_i α_i ρ (S_i0 + Σ_j S_ij)^2 / K_i + Σ_links φ_l(u_l) ] - Σ_j w_j Σ_i r_ij S_ij
//! s.t. Σ_j S_ij <= K_i - S_i0,  u_l <= 1,  Σ_i r_ij S_ij <= c_j (optional),  S >= 0
//! ```
//!
//! Link costs enter through epigraph variables, turning the program into a
//! QP with linear constraints that [`ipm`] solves to high accuracy.

pub(crate) mod ipm;
mod kkt;
mod linalg;
pub(crate) mod program;
mod sqtf;

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Allocation, ModelError, SystemState, Topology};

pub use kkt::{check_kkt, KktReport};
pub use sqtf::sqtf_closed_form;

use ipm::{IpmSettings, IpmStatus, StructuredQp};
use program::{build_block, BlockSpec};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid slot problem: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        best: Box<SolveReport>,
        iterations: usize,
        residual: f64,
    },
}

/// One slot's program: reward weights `w_j` (multipliers or backlogs), the
/// cost weight `V'` and optional per-class service caps.
#[derive(Debug, Clone)]
pub struct SlotProblem<'a> {
    pub state: &'a SystemState,
    pub topo: &'a Topology,
    pub reward_weights: Vec<f64>,
    pub cost_scale: f64,
    pub service_caps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub allocation: Allocation,
    /// Objective without the constants the program drops; see
    /// [`SlotProblem::dropped_constant`].
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative objective accuracy.
    pub tol: f64,
    pub max_iterations: usize,
    /// Log every problem instance at debug level in text form.
    pub dump: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 200,
            dump: false,
        }
    }
}

impl<'a> SlotProblem<'a> {
    pub fn new(state: &'a SystemState, topo: &'a Topology, reward_weights: Vec<f64>, cost_scale: f64) -> Self {
        Self {
            state,
            topo,
            reward_weights,
            cost_scale,
            service_caps: None,
        }
    }

    pub fn with_caps(mut self, caps: Vec<f64>) -> Self {
        self.service_caps = Some(caps);
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        self.state.validate(self.topo)?;
        let m = self.topo.n_jobs();
        if self.reward_weights.len() != m {
            return Err(SolveError::Invalid(format!(
                "{} reward weights for {m} job classes",
                self.reward_weights.len()
            )));
        }
        if self.reward_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SolveError::Invalid("reward weights must be finite and >= 0".into()));
        }
        if !(self.cost_scale.is_finite() && self.cost_scale > 0.0) {
            return Err(SolveError::Invalid(format!("cost scale {} must be > 0", self.cost_scale)));
        }
        if let Some(caps) = &self.service_caps {
            if caps.len() != m || caps.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(SolveError::Invalid("service caps must be m finite values >= 0".into()));
            }
        }
        if self.topo.power().nu != 2.0 {
            return Err(SolveError::Unsupported(format!(
                "power exponent {} (the slot program is quadratic)",
                self.topo.power().nu
            )));
        }
        Ok(())
    }

    /// Program objective of `alloc`: energy without the idle term and link
    /// costs relative to their zero-traffic value, weighted by `V'`, minus
    /// the reward.
    pub fn objective(&self, alloc: &Allocation) -> f64 {
        let (state, topo) = (self.state, self.topo);
        let rho = topo.power().rho;
        let n = topo.n_idcs();
        let mut cost = 0.0;
        for i in 0..n {
            let k = state.active_servers[i];
            if k > 0.0 {
                let s = state.dsj_capacity[i] + alloc.idc_load(topo, i);
                cost += state.prices[i] * rho * s * s / k;
            }
        }
        for from in 0..n {
            for to in 0..n {
                if from == to {
                    continue;
                }
                let traffic = alloc.link_traffic(topo, from, to);
                let b = state.bandwidth(from, to);
                if traffic > 0.0 && b > 0.0 {
                    let m = topo.link_cost(from, to);
                    cost += m.value(traffic / b) - m.zero_value();
                }
            }
        }
        let reward: f64 = (0..topo.n_jobs())
            .map(|j| self.reward_weights[j] * crate::model::serve_rate(topo, alloc, j))
            .sum();
        self.cost_scale * cost - reward
    }

    /// Constants left out of [`objective`](Self::objective):
    /// `V' [Σ_i α_i (1-ρ) K_i + Σ_{used links} φ_l(0)]`, so that
    /// `V' * slot_cost - Σ_j w_j R_j = objective + dropped_constant`.
    pub fn dropped_constant(&self, alloc: &Allocation) -> f64 {
        let (state, topo) = (self.state, self.topo);
        let n = topo.n_idcs();
        let idle: f64 = (0..n)
            .map(|i| state.prices[i] * topo.power().idle() * state.active_servers[i])
            .sum();
        let mut intercepts = 0.0;
        for from in 0..n {
            for to in 0..n {
                if from != to && alloc.link_traffic(topo, from, to) > 0.0 && state.bandwidth(from, to) > 0.0 {
                    intercepts += topo.link_cost(from, to).zero_value();
                }
            }
        }
        self.cost_scale * (idle + intercepts)
    }

    /// Plain-text coefficient listing for offline inspection.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = self.state;
        let _ = writeln!(out, "# slot problem: {} idcs, {} jobs, cost_scale {:e}", self.topo.n_idcs(), self.topo.n_jobs(), self.cost_scale);
        let _ = writeln!(out, "rho {:e}", self.topo.power().rho);
        for i in 0..self.topo.n_idcs() {
            let _ = writeln!(
                out,
                "idc {i} K {:e} S0 {:e} price {:e}",
                s.active_servers[i], s.dsj_capacity[i], s.prices[i]
            );
        }
        for (j, w) in self.reward_weights.iter().enumerate() {
            let cap = self.service_caps.as_ref().map(|c| c[j]);
            let _ = writeln!(out, "job {j} weight {w:e} cap {cap:?}");
        }
        for v in self.topo.vars() {
            let _ = writeln!(out, "var idc {} job {} rate {:e} link {:?}", v.idc, v.job, v.rate, v.link);
        }
        for (l, b) in s.bandwidth.iter().enumerate() {
            let (from, to) = self.topo.link_endpoints(l);
            if from != to && !self.topo.link_vars(from, to).is_empty() {
                let segs: Vec<String> = self
                    .topo
                    .link_cost(from, to)
                    .segments()
                    .iter()
                    .map(|g| format!("{:e}:{:e}", g.slope, g.intercept))
                    .collect();
                let _ = writeln!(out, "link {from}->{to} bandwidth {b:e} segments {}", segs.join(" "));
            }
        }
        out
    }
}

/// Solves `problem` to relative objective accuracy `tol`.
pub fn solve_slot(problem: &SlotProblem, tol: f64) -> Result<SolveReport, SolveError> {
    solve_slot_with(
        problem,
        &SolverSettings {
            tol,
            ..SolverSettings::default()
        },
    )
}

pub fn solve_slot_with(problem: &SlotProblem, settings: &SolverSettings) -> Result<SolveReport, SolveError> {
    problem.validate()?;
    if settings.dump {
        log::debug!("{}", problem.to_text());
    }
    let topo = problem.topo;
    let (block, map) = build_block(
        problem.state,
        topo,
        &BlockSpec {
            cost_scale: problem.cost_scale,
            weights: Some(&problem.reward_weights),
            caps: problem.service_caps.as_deref(),
            prune_by_reward: true,
            costs: true,
        },
    );
    if block.n == 0 {
        let allocation = Allocation::zeros(topo);
        return Ok(SolveReport {
            objective: problem.objective(&allocation),
            allocation,
            kkt_residual: 0.0,
            iterations: 0,
        });
    }
    let qp = StructuredQp {
        blocks: vec![block],
        coupling: Vec::new(),
    };
    let ipm_settings = IpmSettings {
        max_iter: settings.max_iterations,
        tol_feas: 1e-10,
        tol_gap: (settings.tol * 1e-3).min(1e-9),
    };
    let res = ipm::solve(&qp, &ipm_settings);
    let mut values = vec![0.0; topo.n_vars()];
    map.scatter(&res.x[0], &mut values);
    let mut allocation = Allocation::from_values(topo, values)?;
    repair(problem, &mut allocation);
    let report = SolveReport {
        objective: problem.objective(&allocation),
        allocation,
        kkt_residual: res.residual(),
        iterations: res.iterations,
    };
    let acceptable = res.res_primal <= 1e-7 && res.res_dual <= 1e-7 && res.rel_gap <= settings.tol;
    match res.status {
        IpmStatus::Solved => Ok(report),
        _ if acceptable => Ok(report),
        _ => Err(SolveError::NotConverged {
            iterations: report.iterations,
            residual: report.kkt_residual,
            best: Box::new(report),
        }),
    }
}

/// Scales down the variables of any row the interior-point iterate
/// overshoots by rounding, so the returned point is exactly feasible.
pub(crate) fn repair(problem: &SlotProblem, alloc: &mut Allocation) {
    let (state, topo) = (problem.state, problem.topo);
    let n = topo.n_idcs();
    let shrink = |members: Vec<(usize, f64)>, rhs: f64, alloc: &mut Allocation| {
        let lhs: f64 = members.iter().map(|&(k, c)| c * alloc.values()[k]).sum();
        if lhs > rhs {
            let f = if lhs > 0.0 { (rhs / lhs).max(0.0) } else { 0.0 };
            for (k, _) in members {
                alloc.values_mut()[k] *= f;
            }
        }
    };
    for i in 0..n {
        let members = topo.idc_vars(i).iter().map(|&k| (k, 1.0)).collect();
        shrink(members, state.residual_capacity(i), alloc);
    }
    for from in 0..n {
        for to in 0..n {
            if from == to {
                continue;
            }
            let members = topo
                .link_vars(from, to)
                .iter()
                .map(|&k| (k, topo.vars()[k].rate))
                .collect();
            shrink(members, state.bandwidth(from, to), alloc);
        }
    }
    if let Some(caps) = &problem.service_caps {
        for (j, &c) in caps.iter().enumerate() {
            let members = topo.job_vars(j).map(|k| (k, topo.vars()[k].rate)).collect();
            shrink(members, c, alloc);
        }
    }
}
