use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{MetricsSeries, RunOutcome};
use crate::controllers::BoundReport;

/// Fixed leading columns of the per-slot CSV; `Q_j` and `served_j`
/// columns for each class follow.
pub const METRICS_HEADER_PREFIX: [&str; 4] = ["t", "cost_total", "energy", "shift"];

/// One row per slot: `t` (from 1), costs, start-of-slot backlogs and the
/// amount each backlog was drained.
pub fn write_metrics_csv<W: Write>(series: &MetricsSeries, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let m = series.n_jobs;
    let mut header: Vec<String> = METRICS_HEADER_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend((1..=m).map(|j| format!("Q_{j}")));
    header.extend((1..=m).map(|j| format!("served_{j}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for t in 0..series.len() {
        row.clear();
        let c = &series.cost[t];
        row.push((t + 1).to_string());
        row.push(c.grand_total.to_string());
        row.push(c.energy_total.to_string());
        row.push(c.shift_total.to_string());
        row.extend(series.queues[t].iter().map(|x| x.to_string()));
        row.extend(series.served[t].iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub controller: String,
    pub avg_cost: Option<f64>,
    pub delay: Option<f64>,
    pub unstable: Option<bool>,
    pub queue_bound: Option<f64>,
    pub cost_bound: Option<f64>,
    pub error: Option<String>,
}

impl CompareRow {
    pub fn from_outcome(o: &RunOutcome, bounds: Option<&BoundReport>) -> Self {
        match &o.result {
            Ok(s) => Self {
                controller: o.controller.clone(),
                avg_cost: Some(s.aggregates.avg_cost),
                delay: s.aggregates.overall_delay,
                unstable: Some(s.aggregates.unstable),
                queue_bound: bounds.map(|b| b.queue_bound),
                cost_bound: bounds.map(|b| b.cost_bound),
                error: None,
            },
            Err(e) => Self {
                controller: o.controller.clone(),
                avg_cost: None,
                delay: None,
                unstable: None,
                queue_bound: None,
                cost_bound: None,
                error: Some(e.to_string()),
            },
        }
    }
}
