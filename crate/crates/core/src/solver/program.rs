//! Translation of the per-slot program into a scaled QP block.
//!
//! Decision variables are the capacities `S_ij` the topology allows plus one
//! epigraph variable per link whose cost is genuinely piecewise on the
//! reachable utilization range. Each capacity is scaled by its own upper
//! bound, every row is normalized, and the objective is divided by its
//! largest coefficient so the interior-point iterations see O(1) data.

use crate::model::{SystemState, Topology};

use super::ipm::{Block, Row};

pub(crate) struct BlockSpec<'a> {
    pub cost_scale: f64,
    pub weights: Option<&'a [f64]>,
    pub caps: Option<&'a [f64]>,
    /// Drop variables whose marginal reward never beats their marginal cost.
    pub prune_by_reward: bool,
    /// Without costs the block is a pure feasibility region (no epigraph
    /// variables, zero objective).
    pub costs: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockMap {
    /// `(topology var, scale)`: `S = scale * x` for local variable `x`.
    pub vars: Vec<(usize, f64)>,
    pub obj_scale: f64,
}

impl BlockMap {
    /// Writes local solution `x` into a full-length allocation vector,
    /// clamping at zero.
    pub fn scatter(&self, x: &[f64], out: &mut [f64]) {
        for (local, &(k, d)) in self.vars.iter().enumerate() {
            out[k] = d * x[local].max(0.0);
        }
    }
}

pub(crate) fn marginal_energy_at(state: &SystemState, topo: &Topology, i: usize, load: f64) -> f64 {
    let k = state.active_servers[i];
    if k <= 0.0 {
        return 0.0;
    }
    2.0 * state.prices[i] * topo.power().rho * (state.dsj_capacity[i] + load) / k
}

pub(crate) fn build_block(state: &SystemState, topo: &Topology, spec: &BlockSpec) -> (Block, BlockMap) {
    let n_idcs = topo.n_idcs();
    let v = spec.cost_scale;
    let rho = topo.power().rho;

    let mut vars: Vec<(usize, f64)> = Vec::new();
    for (k, slot) in topo.vars().iter().enumerate() {
        let cap_i = state.residual_capacity(slot.idc);
        if cap_i <= 0.0 {
            continue;
        }
        let mut ub = cap_i;
        let mut link_slope = 0.0;
        if let Some(l) = slot.link {
            let (from, to) = topo.link_endpoints(l);
            let b = state.bandwidth(from, to);
            if b <= 0.0 {
                continue;
            }
            ub = ub.min(b / slot.rate);
            link_slope = topo.link_cost_by_index(l).segments()[0].slope * slot.rate / b;
        }
        if let Some(caps) = spec.caps {
            let c = caps[slot.job];
            if c <= 0.0 {
                continue;
            }
            ub = ub.min(c / slot.rate);
        }
        if spec.prune_by_reward {
            let w = spec.weights.map_or(0.0, |w| w[slot.job]);
            let floor = v * (marginal_energy_at(state, topo, slot.idc, 0.0) + link_slope);
            if w * slot.rate <= floor {
                continue;
            }
        }
        if ub > 0.0 && ub.is_finite() {
            vars.push((k, ub));
        }
    }
    let nv = vars.len();

    // links that carry at least one active variable
    let mut link_members: Vec<Vec<usize>> = vec![Vec::new(); n_idcs * n_idcs];
    for (local, &(k, _)) in vars.iter().enumerate() {
        if let Some(l) = topo.vars()[k].link {
            link_members[l].push(local);
        }
    }
    struct LinkTerm {
        link: usize,
        bandwidth: f64,
        members: Vec<usize>,
        segments: Vec<crate::model::Segment>,
    }
    let mut epi: Vec<LinkTerm> = Vec::new();
    let mut linear_link: Vec<(Vec<usize>, f64, f64)> = Vec::new();
    for (l, members) in link_members.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let (from, to) = topo.link_endpoints(l);
        let b = state.bandwidth(from, to);
        let reach: f64 = members
            .iter()
            .map(|&m| topo.vars()[vars[m].0].rate * vars[m].1)
            .sum::<f64>()
            / b;
        let segments = topo.link_cost_by_index(l).active_segments(reach.min(1.0));
        if !spec.costs {
            continue;
        }
        if segments.len() == 1 {
            linear_link.push((members, b, segments[0].slope));
        } else {
            epi.push(LinkTerm {
                link: l,
                bandwidth: b,
                members,
                segments,
            });
        }
    }

    let n = nv + epi.len();
    let mut block = Block::new(n);

    // energy: c_i (S0 + Σ d_k x_k)^2, c_i = V α ρ / K
    for i in 0..n_idcs {
        let k_i = state.active_servers[i];
        if k_i <= 0.0 || !spec.costs {
            continue;
        }
        let c = v * state.prices[i] * rho / k_i;
        let members: Vec<usize> = (0..nv).filter(|&m| topo.vars()[vars[m].0].idc == i).collect();
        for &a in &members {
            let da = vars[a].1;
            block.q[a] += 2.0 * c * state.dsj_capacity[i] * da;
            for &b in &members {
                block.p[a * n + b] += 2.0 * c * da * vars[b].1;
            }
        }
    }
    if let Some(w) = spec.weights {
        for (m, &(k, d)) in vars.iter().enumerate() {
            let slot = topo.vars()[k];
            block.q[m] -= w[slot.job] * slot.rate * d;
        }
    }
    for (members, b, slope) in &linear_link {
        for &m in members {
            let (k, d) = vars[m];
            block.q[m] += v * slope * topo.vars()[k].rate * d / b;
        }
    }
    let mut taus = Vec::with_capacity(epi.len());
    for (e, term) in epi.iter().enumerate() {
        let model = topo.link_cost_by_index(term.link);
        let reach: f64 = term
            .members
            .iter()
            .map(|&m| topo.vars()[vars[m].0].rate * vars[m].1)
            .sum::<f64>()
            / term.bandwidth;
        let span = model.value(reach.min(1.0)) - model.zero_value();
        let tau = v * span.max(1e-9 * (1.0 + model.zero_value().abs()));
        block.q[nv + e] = tau;
        taus.push(tau);
    }

    let obj_scale = block
        .q
        .iter()
        .map(|x| x.abs())
        .chain((0..n).map(|i| block.p[i * n + i].abs()))
        .fold(0.0, f64::max);
    let obj_scale = if obj_scale > 0.0 { obj_scale } else { 1.0 };
    block.p.iter_mut().for_each(|x| *x /= obj_scale);
    block.q.iter_mut().for_each(|x| *x /= obj_scale);

    for m in 0..nv {
        block.push_row(vec![(m, -1.0)], 0.0);
    }
    for i in 0..n_idcs {
        let cap = state.residual_capacity(i);
        let row: Row = (0..nv)
            .filter(|&m| topo.vars()[vars[m].0].idc == i)
            .map(|m| (m, vars[m].1 / cap))
            .collect();
        if !row.is_empty() {
            block.push_row(row, 1.0);
        }
    }
    for l in 0..n_idcs * n_idcs {
        let (from, to) = topo.link_endpoints(l);
        let row: Row = (0..nv)
            .filter(|&m| topo.vars()[vars[m].0].link == Some(l))
            .map(|m| {
                let (k, d) = vars[m];
                (m, topo.vars()[k].rate * d / state.bandwidth(from, to))
            })
            .collect();
        if !row.is_empty() {
            block.push_row(row, 1.0);
        }
    }
    if let Some(caps) = spec.caps {
        for (j, &c) in caps.iter().enumerate() {
            let row: Row = (0..nv)
                .filter(|&m| topo.vars()[vars[m].0].job == j)
                .map(|m| {
                    let (k, d) = vars[m];
                    (m, topo.vars()[k].rate * d / c)
                })
                .collect();
            if !row.is_empty() {
                block.push_row(row, 1.0);
            }
        }
    }
    // V (a_m u + b_m - b_1) <= tau y
    for (e, term) in epi.iter().enumerate() {
        let b1 = topo.link_cost_by_index(term.link).zero_value();
        for seg in &term.segments {
            let mut row: Row = term
                .members
                .iter()
                .map(|&m| {
                    let (k, d) = vars[m];
                    (m, v * seg.slope * topo.vars()[k].rate * d / term.bandwidth)
                })
                .collect();
            row.push((nv + e, -taus[e]));
            let rhs = -v * (seg.intercept - b1);
            let norm = row.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
            for r in row.iter_mut() {
                r.1 /= norm;
            }
            block.push_row(row, rhs / norm);
        }
    }

    (block, BlockMap { vars, obj_scale })
}
