use crate::model::{Allocation, QueueVector, SystemState, Topology};

use super::SolveError;

/// Threshold policy that solves the single-IDC queue-weighted program in
/// closed form.
///
/// Only the class with the largest `Q_j r_j` (lowest index on ties) is
/// served. It receives the whole residual capacity when `Q r >= 2 V ρ α`,
/// nothing when `Q r < 2 V ρ α S_0 / K`, and in between the load at which
/// the marginal energy cost `2 V ρ α (S_0 + S) / K` meets `Q r`. An empty
/// backlog is never served, even at zero price.
pub fn sqtf_closed_form(
    state: &SystemState,
    topo: &Topology,
    queues: &QueueVector,
    v: f64,
) -> Result<Allocation, SolveError> {
    if topo.n_idcs() != 1 {
        return Err(SolveError::Invalid(format!(
            "closed form needs exactly one IDC, got {}",
            topo.n_idcs()
        )));
    }
    if queues.len() != topo.n_jobs() {
        return Err(SolveError::Invalid("queue vector length differs from job count".into()));
    }
    if !(v.is_finite() && v > 0.0) {
        return Err(SolveError::Invalid(format!("V = {v} must be > 0")));
    }
    state.validate(topo)?;
    let mut alloc = Allocation::zeros(topo);
    let mut best: Option<(usize, f64)> = None;
    for j in 0..topo.n_jobs() {
        let score = queues.0[j] * topo.jobs()[j].rates[0];
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((j, score));
        }
    }
    let Some((j, qr)) = best else {
        return Ok(alloc);
    };
    let k = state.active_servers[0];
    let s0 = state.dsj_capacity[0];
    let residual = state.residual_capacity(0);
    if qr <= 0.0 || residual <= 0.0 {
        return Ok(alloc);
    }
    let upper = 2.0 * v * topo.power().rho * state.prices[0];
    let s = if qr >= upper {
        residual
    } else if qr >= upper * s0 / k {
        (qr * k / upper - s0).clamp(0.0, residual)
    } else {
        0.0
    };
    alloc.values_mut()[topo.job_vars(j).start] = s;
    Ok(alloc)
}
