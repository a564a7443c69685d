use serde::{Deserialize, Serialize};

use crate::model::Topology;

use super::{ossi_solve, ControlError, StateDistribution};

/// Performance guarantees of the queue-weighted controller for one `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Drift constant `B`.
    pub b_const: f64,
    pub epsilon: f64,
    pub v: f64,
    /// Optimal ergodic cost at the nominal rates.
    pub g_star: f64,
    /// Optimal ergodic cost with every rate raised by `epsilon`.
    pub g_star_eps: f64,
    /// Bound on the long-run average total backlog: `(B + V g*(ε)) / ε`.
    pub queue_bound: f64,
    /// Bound on the long-run average cost: `g* + B / V`.
    pub cost_bound: f64,
}

/// `B = Σ_i r_i² (K_i^max)² + Σ_j (D_j^m)²` with `r_i` the fastest rate at
/// IDC `i`, over IDCs that serve at least one class.
pub fn drift_constant(topo: &Topology) -> f64 {
    let mut r = vec![0.0f64; topo.n_idcs()];
    for v in topo.vars() {
        r[v.idc] = r[v.idc].max(v.rate);
    }
    let servers: f64 = topo
        .idcs()
        .iter()
        .zip(&r)
        .map(|(idc, &ri)| (ri * idc.k_max).powi(2))
        .sum();
    let arrivals: f64 = topo.jobs().iter().map(|j| j.arrival_bound.powi(2)).sum();
    servers + arrivals
}

pub fn drift_bound_constants(
    topo: &Topology,
    v: f64,
    epsilon: f64,
    g_star_eps: f64,
    g_star: f64,
) -> Result<BoundReport, ControlError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(ControlError::Invalid(format!("epsilon {epsilon} must be > 0")));
    }
    if !(v.is_finite() && v > 0.0) {
        return Err(ControlError::Invalid(format!("V = {v} must be > 0")));
    }
    let b_const = drift_constant(topo);
    Ok(BoundReport {
        b_const,
        epsilon,
        v,
        g_star,
        g_star_eps,
        queue_bound: (b_const + v * g_star_eps) / epsilon,
        cost_bound: g_star + b_const / v,
    })
}

/// Computes both ergodic optima and the bounds. `epsilon` defaults to 5%
/// of the smallest positive mean rate.
pub fn bound_report(
    dist: &StateDistribution,
    topo: &Topology,
    lambda: &[f64],
    v: f64,
    epsilon: Option<f64>,
    tol: f64,
) -> Result<BoundReport, ControlError> {
    let eps = match epsilon {
        Some(e) => e,
        None => {
            let min = lambda.iter().copied().filter(|&l| l > 0.0).fold(f64::INFINITY, f64::min);
            if !min.is_finite() {
                return Err(ControlError::Invalid("no positive arrival rate to derive epsilon from".into()));
            }
            0.05 * min
        }
    };
    let g_star = ossi_solve(dist, topo, lambda, tol)?.optimal_cost;
    let raised: Vec<f64> = lambda.iter().map(|l| l + eps).collect();
    let g_star_eps = ossi_solve(dist, topo, &raised, tol)?.optimal_cost;
    drift_bound_constants(topo, v, eps, g_star_eps, g_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IdcSpec, JobClass, PowerModel, ShiftCostModel};

    fn topo() -> Topology {
        Topology::with_uniform_links(
            vec![IdcSpec { k_max: 10.0 }],
            vec![JobClass {
                origin: 0,
                serving_set: vec![0],
                rates: vec![1.0],
                mean_rate: 2.0,
                arrival_bound: 4.0,
            }],
            PowerModel::default(),
            ShiftCostModel::default(),
        )
        .unwrap()
    }

    #[test]
    fn constant_and_bounds() {
        let t = topo();
        assert_eq!(drift_constant(&t), 116.0);
        let rep = drift_bound_constants(&t, 1000.0, 1.0, 60.0, 50.0).unwrap();
        assert!((rep.cost_bound - 50.116).abs() < 1e-12);
        assert_eq!(rep.queue_bound, 116.0 + 1000.0 * 60.0);
        let twice = drift_bound_constants(&t, 1000.0, 2.0, 60.0, 50.0).unwrap();
        assert_eq!(twice.queue_bound, (116.0 + 1000.0 * 60.0) / 2.0);
        assert!(drift_bound_constants(&t, 1000.0, 0.0, 1.0, 1.0).is_err());
    }
}
