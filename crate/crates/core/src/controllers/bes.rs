use crate::model::{Allocation, QueueVector, SystemState, Topology};

use super::{ControlError, Controller, SlotContext};

/// Max-min fair split of `available` among `demands`: every demand gets an
/// equal share, and whatever a small demand leaves unused is shared again
/// among the rest until nothing changes.
pub fn water_fill(available: f64, demands: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; demands.len()];
    let mut open: Vec<usize> = (0..demands.len()).filter(|&j| demands[j] > 0.0).collect();
    let mut left = available.max(0.0);
    while !open.is_empty() && left > 0.0 {
        let share = left / open.len() as f64;
        let (small, big): (Vec<usize>, Vec<usize>) = open.iter().partition(|&&j| demands[j] <= share);
        if small.is_empty() {
            for &j in &big {
                out[j] = share;
            }
            break;
        }
        for &j in &small {
            out[j] = demands[j];
            left -= demands[j];
        }
        open = big;
    }
    out
}

/// Best effort: each class is served only at its origin, the origin's
/// residual capacity split by [`water_fill`] over the classes' backlogs.
/// Classes whose origin cannot serve them wait forever.
pub fn bes_step(state: &SystemState, topo: &Topology, q: &QueueVector) -> Allocation {
    let mut alloc = Allocation::zeros(topo);
    for i in 0..topo.n_idcs() {
        let local: Vec<usize> = topo
            .idc_vars(i)
            .iter()
            .copied()
            .filter(|&k| topo.vars()[k].link.is_none())
            .collect();
        let demands: Vec<f64> = local
            .iter()
            .map(|&k| {
                let v = topo.vars()[k];
                q.0[v.job].max(0.0) / v.rate
            })
            .collect();
        let shares = water_fill(state.residual_capacity(i), &demands);
        // never exceed the capacity through rounding
        let total: f64 = shares.iter().sum();
        let cap = state.residual_capacity(i);
        let f = if total > cap { cap / total } else { 1.0 };
        for (&k, s) in local.iter().zip(shares) {
            alloc.values_mut()[k] = s * f;
        }
    }
    alloc
}

#[derive(Debug, Clone, Default)]
pub struct Bes;

impl Controller for Bes {
    fn name(&self) -> String {
        "bes".into()
    }

    fn decide(&mut self, ctx: &SlotContext) -> Result<Allocation, ControlError> {
        if ctx.queues.len() != ctx.topo.n_jobs() {
            return Err(ControlError::Invalid("queue vector length differs from job count".into()));
        }
        Ok(bes_step(ctx.state, ctx.topo, ctx.queues))
    }
}
