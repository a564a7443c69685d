use serde::{Deserialize, Serialize};

use crate::model::{queue_step, CostBreakdown, QueueVector};

/// Time averages of one run. Delays are Little's-law ratios in slots and
/// are absent for classes that never received arrivals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub slots: usize,
    pub avg_cost: f64,
    pub avg_energy: f64,
    pub avg_shift: f64,
    pub avg_queue: Vec<f64>,
    pub avg_total_queue: f64,
    pub avg_arrival: Vec<f64>,
    pub avg_rate: Vec<f64>,
    pub avg_served: Vec<f64>,
    pub delay: Vec<Option<f64>>,
    pub overall_delay: Option<f64>,
    /// Least-squares slope of the total backlog over the second half.
    pub queue_slope: f64,
    pub unstable: bool,
}

/// Per-slot record of a run. `queues[t]` is the backlog at the start of
/// slot `t`; `rates` are the allocated service rates and `served` what they
/// actually drained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub controller: String,
    pub n_jobs: usize,
    pub cost: Vec<CostBreakdown>,
    pub queues: Vec<Vec<f64>>,
    pub final_queues: Vec<f64>,
    pub rates: Vec<Vec<f64>>,
    pub served: Vec<Vec<f64>>,
    pub arrivals: Vec<Vec<f64>>,
    /// Total traffic moved between IDCs in each slot.
    pub shifted: Vec<f64>,
    pub aggregates: Aggregates,
}

impl MetricsSeries {
    pub(crate) fn with_capacity(controller: String, n_jobs: usize, horizon: usize) -> Self {
        Self {
            controller,
            n_jobs,
            cost: Vec::with_capacity(horizon),
            queues: Vec::with_capacity(horizon),
            final_queues: vec![0.0; n_jobs],
            rates: Vec::with_capacity(horizon),
            served: Vec::with_capacity(horizon),
            arrivals: Vec::with_capacity(horizon),
            shifted: Vec::with_capacity(horizon),
            aggregates: Aggregates::default(),
        }
    }

    pub(crate) fn push(
        &mut self,
        cost: CostBreakdown,
        queues: Vec<f64>,
        rates: Vec<f64>,
        served: Vec<f64>,
        arrivals: Vec<f64>,
        shifted: f64,
    ) {
        self.cost.push(cost);
        self.queues.push(queues);
        self.rates.push(rates);
        self.served.push(served);
        self.arrivals.push(arrivals);
        self.shifted.push(shifted);
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    /// Backlog at the start of slot `t`, or after the last slot for
    /// `t == len()`.
    pub fn queue_at(&self, t: usize) -> &[f64] {
        if t == self.len() {
            &self.final_queues
        } else {
            &self.queues[t]
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

/// Recomputes every aggregate from the per-slot series.
pub fn compute_aggregates(s: &MetricsSeries, stability_threshold: f64) -> Aggregates {
    let t = s.len();
    let m = s.n_jobs;
    let col = |rows: &[Vec<f64>], j: usize| mean(rows.iter().map(|r| r[j]), t);
    let avg_queue: Vec<f64> = (0..m).map(|j| col(&s.queues, j)).collect();
    let avg_arrival: Vec<f64> = (0..m).map(|j| col(&s.arrivals, j)).collect();
    let avg_total_queue = mean(s.queues.iter().map(|r| r.iter().sum::<f64>()), t);
    let total_arrival = mean(s.arrivals.iter().map(|r| r.iter().sum::<f64>()), t);
    let ratio = |q: f64, a: f64| (a > 0.0).then(|| q / a);

    let half = t / 2;
    let ys: Vec<f64> = s.queues[half..].iter().map(|r| r.iter().sum::<f64>()).collect();
    let queue_slope = slope(&ys);
    Aggregates {
        slots: t,
        avg_cost: mean(s.cost.iter().map(|c| c.grand_total), t),
        avg_energy: mean(s.cost.iter().map(|c| c.energy_total), t),
        avg_shift: mean(s.cost.iter().map(|c| c.shift_total), t),
        delay: avg_queue.iter().zip(&avg_arrival).map(|(&q, &a)| ratio(q, a)).collect(),
        overall_delay: ratio(avg_total_queue, total_arrival),
        avg_rate: (0..m).map(|j| col(&s.rates, j)).collect(),
        avg_served: (0..m).map(|j| col(&s.served, j)).collect(),
        avg_queue,
        avg_total_queue,
        avg_arrival,
        queue_slope,
        unstable: queue_slope > stability_threshold * total_arrival && total_arrival > 0.0,
    }
}

/// Ordinary least-squares slope of `ys` against its index.
fn slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Replays the queue recursion from the recorded service and arrivals and
/// reports the first slot whose recorded next backlog differs (exactly).
pub fn replay_check(s: &MetricsSeries) -> Result<(), String> {
    for t in 0..s.len() {
        let next = queue_step(&QueueVector(s.queues[t].clone()), &s.rates[t], &s.arrivals[t])
            .map_err(|e| format!("slot {t}: {e}"))?;
        if next.0.as_slice() != s.queue_at(t + 1) {
            return Err(format!("slot {t}: replayed {:?}, recorded {:?}", next.0, s.queue_at(t + 1)));
        }
    }
    Ok(())
}

/// Neumaier-compensated sum.
fn exact_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `|Σ arrivals − Σ served − (final backlog − initial backlog)|`.
pub fn conservation_error(s: &MetricsSeries) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let arrived = exact_sum(s.arrivals.iter().flatten().copied());
    let served = exact_sum(s.served.iter().flatten().copied());
    let initial = exact_sum(s.queues[0].iter().copied());
    let last = exact_sum(s.final_queues.iter().copied());
    let balance = exact_sum([arrived, -served, -last, initial].into_iter());
    balance.abs()
}

/// Per-class service averaged over consecutive windows of `window` slots
/// and divided by that class's mean rate; trailing partial windows are
/// dropped. Returns `[window][job]`.
pub fn windowed_rates(served: &[Vec<f64>], lambda: &[f64], window: usize) -> Result<Vec<Vec<f64>>, String> {
    if window == 0 {
        return Err("window must be >= 1".into());
    }
    if window > served.len() {
        return Err(format!("window {window} exceeds the horizon of {} slots", served.len()));
    }
    let m = lambda.len();
    Ok(served
        .chunks_exact(window)
        .map(|chunk| {
            (0..m)
                .map(|j| {
                    let avg = chunk.iter().map(|r| r[j]).sum::<f64>() / window as f64;
                    if lambda[j] > 0.0 {
                        avg / lambda[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}

/// Fraction of `(window, job)` entries with no service at all.
pub fn zero_fraction(rates: &[Vec<f64>]) -> f64 {
    let total: usize = rates.iter().map(|r| r.len()).sum();
    if total == 0 {
        return 0.0;
    }
    rates.iter().flatten().filter(|&&x| x <= 0.0).count() as f64 / total as f64
}

/// Coefficient of variation of each class's series, averaged over classes.
pub fn coefficient_of_variation(rates: &[Vec<f64>]) -> f64 {
    let Some(first) = rates.first() else { return 0.0 };
    let m = first.len();
    let n = rates.len() as f64;
    let mut acc = 0.0;
    let mut counted = 0;
    for j in 0..m {
        let mu = rates.iter().map(|r| r[j]).sum::<f64>() / n;
        if mu <= 0.0 {
            continue;
        }
        let var = rates.iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / n;
        acc += var.sqrt() / mu;
        counted += 1;
    }
    if counted == 0 {
        0.0
    } else {
        acc / counted as f64
    }
}
