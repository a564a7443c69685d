//! Discrete-time engine: observe the state and backlogs, ask a controller
//! for an allocation, audit it, charge its cost and advance the queues.

mod metrics;
mod output;

pub use metrics::{
    coefficient_of_variation, compute_aggregates, conservation_error, replay_check, windowed_rates,
    zero_fraction, Aggregates, MetricsSeries,
};
pub use output::{write_metrics_csv, CompareRow, METRICS_HEADER_PREFIX};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{ControlError, Controller, SlotContext, StateDistribution};
use crate::model::{
    check_feasible, queue_step, serve_rates, slot_cost, ModelError, QueueVector, SystemState, Topology,
    FEASIBILITY_TOL,
};
use crate::rng::{substream, Stream};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("slot {slot}: controller failed: {source}")]
    Control {
        slot: usize,
        #[source]
        source: ControlError,
    },
    #[error("slot {slot}: controller returned an infeasible allocation: {detail}")]
    Infeasible { slot: usize, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Where each slot's exogenous state comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateSource {
    /// i.i.d. draws from a finite distribution.
    Ergodic(StateDistribution),
    /// A fixed sequence, one state per slot.
    Series(Vec<SystemState>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArrivalSource {
    /// i.i.d. uniform arrivals with the mean and bound of each job class.
    Uniform,
    /// Recorded arrivals, `series[t][j]`.
    Series(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub topo: Topology,
    pub states: StateSource,
    pub arrivals: ArrivalSource,
    pub horizon: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::Invalid("horizon must be > 0".into()));
        }
        match &self.states {
            StateSource::Ergodic(d) => d.validate(&self.topo)?,
            StateSource::Series(s) => {
                if s.len() < self.horizon {
                    return Err(SimError::Invalid(format!(
                        "state series has {} slots, horizon is {}",
                        s.len(),
                        self.horizon
                    )));
                }
                for st in s {
                    st.validate(&self.topo)?;
                }
            }
        }
        if let ArrivalSource::Series(a) = &self.arrivals {
            if a.len() < self.horizon {
                return Err(SimError::Invalid(format!(
                    "arrival series has {} slots, horizon is {}",
                    a.len(),
                    self.horizon
                )));
            }
            if a.iter().any(|row| row.len() != self.topo.n_jobs() || row.iter().any(|x| !(x.is_finite() && *x >= 0.0))) {
                return Err(SimError::Invalid("arrival rows must hold one finite value >= 0 per job".into()));
            }
        }
        Ok(())
    }

    /// Mean arrival rates: the configured means for generated arrivals,
    /// the empirical means over the horizon for recorded ones.
    pub fn mean_arrivals(&self) -> Vec<f64> {
        match &self.arrivals {
            ArrivalSource::Uniform => self.topo.mean_rates(),
            ArrivalSource::Series(a) => {
                let t = self.horizon.min(a.len()).max(1);
                (0..self.topo.n_jobs())
                    .map(|j| a[..t].iter().map(|row| row[j]).sum::<f64>() / t as f64)
                    .collect()
            }
        }
    }

    pub fn distribution(&self) -> Option<&StateDistribution> {
        match &self.states {
            StateSource::Ergodic(d) => Some(d),
            StateSource::Series(_) => None,
        }
    }
}

/// Draws a state index with probability `π_ω`.
pub fn sample_state<'a, R: Rng>(dist: &'a StateDistribution, rng: &mut R) -> (usize, &'a SystemState) {
    let idx = if dist.len() == 1 {
        0
    } else {
        WeightedIndex::new(&dist.probs).map(|w| w.sample(rng)).unwrap_or(0)
    };
    (idx, &dist.states[idx])
}

/// Arrivals uniform on an interval centred on the mean, as wide as the
/// bound allows: `[0, 2λ]` when `D >= 2λ`.
fn uniform_arrivals(topo: &Topology, rng: &mut ChaCha8Rng) -> Vec<f64> {
    topo.jobs()
        .iter()
        .map(|job| {
            let lo = (2.0 * job.mean_rate - job.arrival_bound).max(0.0);
            let hi = (2.0 * job.mean_rate).min(job.arrival_bound);
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Separates the random streams of independent runs of one scenario.
    pub run_index: u64,
    /// Instability flag threshold on the late backlog slope, as a fraction
    /// of mean total arrivals per slot.
    pub stability_threshold: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            run_index: 0,
            stability_threshold: 0.01,
        }
    }
}

pub fn run(scenario: &Scenario, controller: &mut dyn Controller) -> Result<MetricsSeries, SimError> {
    run_with(scenario, controller, &RunOptions::default())
}

pub fn run_with(
    scenario: &Scenario,
    controller: &mut dyn Controller,
    opts: &RunOptions,
) -> Result<MetricsSeries, SimError> {
    scenario.validate()?;
    let topo = &scenario.topo;
    let m = topo.n_jobs();
    let mut state_rng = substream(scenario.seed, Stream::States, opts.run_index);
    let mut arrival_rng = substream(scenario.seed, Stream::Arrivals, opts.run_index);
    let mut series = MetricsSeries::with_capacity(controller.name(), m, scenario.horizon);
    let mut q = QueueVector::zeros(m);
    for t in 0..scenario.horizon {
        let (state_index, state) = match &scenario.states {
            StateSource::Ergodic(d) => {
                let (i, s) = sample_state(d, &mut state_rng);
                (Some(i), s)
            }
            StateSource::Series(s) => (None, &s[t]),
        };
        let ctx = SlotContext {
            t,
            state,
            state_index,
            topo,
            queues: &q,
        };
        let alloc = controller
            .decide(&ctx)
            .map_err(|source| SimError::Control { slot: t, source })?;
        let violations = check_feasible(state, topo, &alloc, FEASIBILITY_TOL);
        if !violations.is_empty() || alloc.values().len() != topo.n_vars() {
            let detail = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
            return Err(SimError::Infeasible { slot: t, detail });
        }
        let cost = slot_cost(state, topo, &alloc)?;
        let rates = serve_rates(topo, &alloc);
        let arrivals = match &scenario.arrivals {
            ArrivalSource::Uniform => uniform_arrivals(topo, &mut arrival_rng),
            ArrivalSource::Series(a) => a[t].clone(),
        };
        let served: Vec<f64> = q.0.iter().zip(&rates).map(|(&qj, &r)| qj - (qj - r).max(0.0)).collect();
        let next = queue_step(&q, &rates, &arrivals)?;
        let shifted: f64 = (0..topo.n_idcs())
            .flat_map(|from| (0..topo.n_idcs()).map(move |to| (from, to)))
            .filter(|(from, to)| from != to)
            .map(|(from, to)| alloc.link_traffic(topo, from, to))
            .sum();
        series.push(cost, q.0.clone(), rates, served, arrivals, shifted);
        q = next;
    }
    series.final_queues = q.0;
    series.aggregates = compute_aggregates(&series, opts.stability_threshold);
    Ok(series)
}

/// Outcome of one controller in a comparison.
#[derive(Debug)]
pub struct RunOutcome {
    pub controller: String,
    pub result: Result<MetricsSeries, SimError>,
}

/// Runs every controller on the same realizations of states and arrivals.
/// A failing controller does not stop the others.
pub fn compare(scenario: &Scenario, controllers: Vec<Box<dyn Controller>>, opts: &RunOptions) -> Vec<RunOutcome> {
    controllers
        .into_iter()
        .map(|mut c| RunOutcome {
            controller: c.name(),
            result: run_with(scenario, c.as_mut(), opts),
        })
        .collect()
}

#[cfg(test)]
mod tests;
