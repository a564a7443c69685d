//! Optimality certificate for a candidate allocation.
//!
//! Given only the allocation, the check looks for multipliers on the
//! (nearly) active rows and a subgradient of each link cost that make the
//! reduced gradient vanish on positive variables and stay nonnegative on
//! variables at zero. The best fit comes from a small nonnegative
//! least-squares problem; what it cannot explain is the stationarity
//! residual.

use serde::{Deserialize, Serialize};

use crate::model::Allocation;

use super::ipm::{self, Block, IpmSettings, StructuredQp};
use super::SlotProblem;

/// Relative slack under which a row or variable counts as active.
const ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

struct RowInfo {
    terms: Vec<(usize, f64)>,
    slack: f64,
    scale: f64,
}

pub fn check_kkt(problem: &SlotProblem, alloc: &Allocation) -> KktReport {
    let (state, topo) = (problem.state, problem.topo);
    let s = alloc.values();
    let nv = topo.n_vars();
    let n = topo.n_idcs();
    let v = problem.cost_scale;
    let rho = topo.power().rho;

    let s_scale = (0..n)
        .map(|i| state.residual_capacity(i))
        .fold(0.0, f64::max)
        .max(s.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
    let s_scale = if s_scale > 0.0 { s_scale } else { 1.0 };

    // gradient at the lowest link subgradient, plus kink freedom
    let mut grad = vec![0.0; nv];
    let mut g_scale: f64 = 0.0;
    let mut kinks: Vec<(usize, f64)> = Vec::new(); // (link, width)
    let mut kink_of = vec![None; n * n];
    for (k, slot) in topo.vars().iter().enumerate() {
        let i = slot.idc;
        let kk = state.active_servers[i];
        let energy = if kk > 0.0 {
            v * 2.0 * state.prices[i] * rho * (state.dsj_capacity[i] + alloc.idc_load(topo, i)) / kk
        } else {
            0.0
        };
        let reward = problem.reward_weights[slot.job] * slot.rate;
        grad[k] = energy - reward;
        g_scale = g_scale.max(energy.abs()).max(reward.abs());
        if let Some(l) = slot.link {
            let (from, to) = topo.link_endpoints(l);
            let b = state.bandwidth(from, to);
            if b > 0.0 {
                let model = topo.link_cost_by_index(l);
                let u = alloc.link_traffic(topo, from, to) / b;
                let slope = model.subgradient_range(u, 0.0).1;
                let (lo, hi) = model.subgradient_range(u, ACTIVE_TOL * slope.max(1.0));
                grad[k] += v * lo * slot.rate / b;
                g_scale = g_scale.max(v * hi * slot.rate / b);
                if hi > lo && kink_of[l].is_none() {
                    kink_of[l] = Some(kinks.len());
                    kinks.push((l, hi - lo));
                }
            }
        }
    }
    let g_scale = if g_scale > 0.0 { g_scale } else { 1.0 };

    // constraint rows in original units
    let mut rows: Vec<RowInfo> = Vec::new();
    for i in 0..n {
        let terms: Vec<(usize, f64)> = topo.idc_vars(i).iter().map(|&k| (k, 1.0)).collect();
        if !terms.is_empty() {
            let lhs: f64 = terms.iter().map(|&(k, c)| c * s[k]).sum();
            rows.push(RowInfo { terms, slack: state.residual_capacity(i) - lhs, scale: s_scale });
        }
    }
    for from in 0..n {
        for to in 0..n {
            if from == to || topo.link_vars(from, to).is_empty() {
                continue;
            }
            let terms: Vec<(usize, f64)> = topo
                .link_vars(from, to)
                .iter()
                .map(|&k| (k, topo.vars()[k].rate))
                .collect();
            let lhs: f64 = terms.iter().map(|&(k, c)| c * s[k]).sum();
            let rmax = terms.iter().map(|t| t.1).fold(0.0, f64::max);
            rows.push(RowInfo { terms, slack: state.bandwidth(from, to) - lhs, scale: s_scale * rmax });
        }
    }
    if let Some(caps) = &problem.service_caps {
        for (j, &c) in caps.iter().enumerate() {
            let terms: Vec<(usize, f64)> = topo.job_vars(j).map(|k| (k, topo.vars()[k].rate)).collect();
            let lhs: f64 = terms.iter().map(|&(k, c)| c * s[k]).sum();
            let rmax = terms.iter().map(|t| t.1).fold(0.0, f64::max);
            rows.push(RowInfo { terms, slack: c - lhs, scale: s_scale * rmax });
        }
    }

    let mut primal: f64 = s.iter().map(|&x| (-x).max(0.0) / s_scale).fold(0.0, f64::max);
    for r in &rows {
        primal = primal.max((-r.slack).max(0.0) / r.scale);
    }
    if s.iter().any(|x| !x.is_finite()) {
        primal = f64::INFINITY;
    }

    let active: Vec<usize> = (0..rows.len())
        .filter(|&r| rows[r].slack <= ACTIVE_TOL * rows[r].scale)
        .collect();
    let at_zero: Vec<bool> = s.iter().map(|&x| x <= ACTIVE_TOL * s_scale).collect();

    // reduced gradient d_k = c0_k + A_k z, z = (y / g_scale, kink offsets)
    let na = active.len();
    let nk = kinks.len();
    let nz = na + nk;
    let mut a = vec![vec![0.0; nz]; nv];
    for (col, &r) in active.iter().enumerate() {
        for &(k, c) in &rows[r].terms {
            a[k][col] += c;
        }
    }
    for (k, slot) in topo.vars().iter().enumerate() {
        if let Some(l) = slot.link {
            if let Some(kc) = kink_of[l] {
                let (from, to) = topo.link_endpoints(l);
                a[k][na + kc] += v * slot.rate / (state.bandwidth(from, to) * g_scale);
            }
        }
    }
    let c0: Vec<f64> = grad.iter().map(|g| g / g_scale).collect();
    let zero_vars: Vec<usize> = (0..nv).filter(|&k| at_zero[k]).collect();
    let ne = zero_vars.len();

    let z = if nz + ne == 0 {
        Vec::new()
    } else {
        let dim = nz + ne;
        let mut blk = Block::new(dim);
        for k in 0..nv {
            if at_zero[k] {
                continue;
            }
            for p in 0..nz {
                blk.q[p] += c0[k] * a[k][p];
                for q in 0..nz {
                    blk.p[p * dim + q] += a[k][p] * a[k][q];
                }
            }
        }
        for p in 0..na {
            blk.p[p * dim + p] += 1e-10;
        }
        for e in 0..ne {
            blk.p[(nz + e) * dim + nz + e] += 1.0;
        }
        for p in 0..na {
            blk.push_row(vec![(p, -1.0)], 0.0);
        }
        for (kc, &(_, width)) in kinks.iter().enumerate() {
            blk.push_row(vec![(na + kc, -1.0)], 0.0);
            blk.push_row(vec![(na + kc, 1.0)], width);
        }
        for (e, &k) in zero_vars.iter().enumerate() {
            blk.push_row(vec![(nz + e, -1.0)], 0.0);
            let mut row: Vec<(usize, f64)> = (0..nz)
                .filter(|&p| a[k][p] != 0.0)
                .map(|p| (p, -a[k][p]))
                .collect();
            row.push((nz + e, -1.0));
            blk.push_row(row, c0[k]);
        }
        let qp = StructuredQp { blocks: vec![blk], coupling: Vec::new() };
        let res = ipm::solve(
            &qp,
            &IpmSettings { max_iter: 200, tol_feas: 1e-13, tol_gap: 1e-13 },
        );
        let mut z = res.x.into_iter().next().unwrap_or_default();
        z.truncate(nz);
        for p in 0..na {
            z[p] = z[p].max(0.0);
        }
        for (kc, &(_, width)) in kinks.iter().enumerate() {
            z[na + kc] = z[na + kc].clamp(0.0, width);
        }
        z
    };

    let mut stationarity: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for k in 0..nv {
        let d = c0[k] + (0..nz).map(|p| a[k][p] * z[p]).sum::<f64>();
        if at_zero[k] {
            stationarity = stationarity.max((-d).max(0.0));
            complementarity = complementarity.max(s[k].max(0.0) / s_scale * d.abs());
        } else {
            stationarity = stationarity.max(d.abs());
        }
    }
    for (col, &r) in active.iter().enumerate() {
        complementarity = complementarity.max(z[col] * rows[r].slack.abs() / rows[r].scale);
    }
    KktReport {
        stationarity,
        primal,
        complementarity,
    }
}
