use serde::{Deserialize, Serialize};

use crate::controllers::StateDistribution;
use crate::model::{IdcSpec, PowerModel, ShiftCostModel, SystemState, Topology};
use crate::rng::{substream, Stream};
use crate::sim::{ArrivalSource, Scenario, StateSource};

use super::{check_range, draw, random_jobs, TraceError};

/// Ergodic scenario with every state field drawn uniformly from a range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_idcs: usize,
    pub n_jobs: usize,
    pub n_states: usize,
    /// Active servers per IDC and state (rounded to whole servers).
    pub capacity: [f64; 2],
    /// Residual bandwidth per ordered link and state.
    pub bandwidth: [f64; 2],
    pub price: [f64; 2],
    /// Delay-sensitive demand as a fraction of active capacity.
    pub dsj_fraction: [f64; 2],
    /// Mean delay-tolerant capacity demand over mean delay-sensitive demand.
    pub load_ratio: f64,
    /// Idle power `1 - ρ` of a server.
    pub idle_power: f64,
    /// Unit service rates `r_ij`.
    pub rate: [f64; 2],
    /// Probability that an IDC belongs to a class's serving set.
    pub serving_prob: f64,
    pub shift_cost: ShiftCostModel,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_idcs: 5,
            n_jobs: 10,
            n_states: 100,
            capacity: [10_000.0, 15_000.0],
            bandwidth: [3000.0, 4000.0],
            price: [1.0, 10.0],
            dsj_fraction: [0.0, 0.4],
            load_ratio: 1.0,
            idle_power: 0.5,
            rate: [5.0, 10.0],
            serving_prob: 0.5,
            shift_cost: ShiftCostModel::default(),
            horizon: 1000,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.n_idcs == 0 || self.n_jobs == 0 || self.n_states == 0 {
            return Err(TraceError::Invalid("n_idcs, n_jobs and n_states must be >= 1".into()));
        }
        check_range("capacity", self.capacity)?;
        check_range("bandwidth", self.bandwidth)?;
        check_range("price", self.price)?;
        check_range("dsj_fraction", self.dsj_fraction)?;
        check_range("rate", self.rate)?;
        if self.capacity[1] <= 0.0 {
            return Err(TraceError::Invalid("capacity range must include positive values".into()));
        }
        if self.dsj_fraction[1] > 1.0 {
            return Err(TraceError::Invalid("dsj_fraction must stay within [0, 1]".into()));
        }
        if self.rate[0] <= 0.0 {
            return Err(TraceError::Invalid("rates must be > 0".into()));
        }
        if !(self.load_ratio.is_finite() && self.load_ratio >= 0.0) {
            return Err(TraceError::Invalid("load_ratio must be >= 0".into()));
        }
        if !(self.serving_prob > 0.0 && self.serving_prob <= 1.0) {
            return Err(TraceError::Invalid("serving_prob must be in (0, 1]".into()));
        }
        if self.horizon == 0 {
            return Err(TraceError::Invalid("horizon must be >= 1".into()));
        }
        PowerModel::new(1.0 - self.idle_power, 2.0)?;
        Ok(())
    }
}

/// Draws the topology, then `n_states` equally likely states. Each class's
/// mean rate is its equal share of the delay-tolerant capacity demand,
/// times its mean unit rate over its serving set; arrivals are uniform on
/// `[0, 2λ]`.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<Scenario, TraceError> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, Stream::Scenario, 0);
    let n = cfg.n_idcs;
    let mut jobs = random_jobs(&mut rng, n, cfg.n_jobs, cfg.serving_prob, cfg.rate);

    let states: Vec<SystemState> = (0..cfg.n_states)
        .map(|_| {
            let active_servers: Vec<f64> = (0..n).map(|_| draw(&mut rng, cfg.capacity).round()).collect();
            let dsj_capacity = active_servers.iter().map(|&k| k * draw(&mut rng, cfg.dsj_fraction)).collect();
            let prices = (0..n).map(|_| draw(&mut rng, cfg.price)).collect();
            let bandwidth = (0..n * n)
                .map(|l| if l / n == l % n { 0.0 } else { draw(&mut rng, cfg.bandwidth) })
                .collect();
            SystemState {
                active_servers,
                prices,
                dsj_capacity,
                bandwidth,
            }
        })
        .collect();

    let per_state = |f: &dyn Fn(&SystemState) -> f64| states.iter().map(f).sum::<f64>() / states.len() as f64;
    let dsj_demand = per_state(&|s| s.dsj_capacity.iter().sum());
    let residual = per_state(&|s| (0..n).map(|i| s.residual_capacity(i)).sum());
    let dtj_demand = cfg.load_ratio * dsj_demand;
    if dtj_demand > residual {
        log::warn!(
            "delay-tolerant demand {dtj_demand:.1} exceeds the mean residual capacity {residual:.1}; the scenario is overloaded"
        );
    }
    let share = dtj_demand / cfg.n_jobs as f64;
    for job in &mut jobs {
        let mean_r = job.rates.iter().sum::<f64>() / job.rates.len() as f64;
        job.mean_rate = share * mean_r;
        job.arrival_bound = 2.0 * job.mean_rate;
    }
    let k_max = cfg.capacity[1].round().max(1.0);
    let topo = Topology::with_uniform_links(
        vec![IdcSpec { k_max }; n],
        jobs,
        PowerModel::new(1.0 - cfg.idle_power, 2.0)?,
        cfg.shift_cost.clone(),
    )?;
    Ok(Scenario {
        topo,
        states: StateSource::Ergodic(StateDistribution::uniform(states)?),
        arrivals: ArrivalSource::Uniform,
        horizon: cfg.horizon,
        seed: cfg.seed,
    })
}
