use serde::{Deserialize, Serialize};

use super::{Allocation, ModelError, SystemState, Topology, Violation, ViolationKind};

/// Absolute slack, in constraint units, tolerated by feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Cost of one slot. `shift_per_link` is row-major over ordered IDC pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub energy_per_idc: Vec<f64>,
    pub shift_per_link: Vec<f64>,
    pub energy_total: f64,
    pub shift_total: f64,
    pub grand_total: f64,
}

/// Lists every Allocation constraint that `alloc` breaks by more than `tol`.
pub fn check_feasible(
    state: &SystemState,
    topo: &Topology,
    alloc: &Allocation,
    tol: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for (k, v) in topo.vars().iter().enumerate() {
        let s = alloc.values()[k];
        if !(s >= -tol) {
            out.push(Violation {
                kind: ViolationKind::Negative { idc: v.idc, job: v.job },
                excess: if s.is_nan() { f64::INFINITY } else { -s },
            });
        }
    }
    let n = topo.n_idcs();
    for i in 0..n {
        let excess = alloc.idc_load(topo, i) - state.residual_capacity(i);
        if excess > tol {
            out.push(Violation {
                kind: ViolationKind::Capacity { idc: i },
                excess,
            });
        }
    }
    for from in 0..n {
        for to in 0..n {
            if from == to || topo.link_vars(from, to).is_empty() {
                continue;
            }
            let excess = alloc.link_traffic(topo, from, to) - state.bandwidth(from, to);
            if excess > tol {
                out.push(Violation {
                    kind: ViolationKind::Bandwidth { from, to },
                    excess,
                });
            }
        }
    }
    out
}

/// Energy and shifting cost of serving `alloc` in `state`.
///
/// A link carrying no delay-tolerant traffic costs nothing, whatever its
/// segments' value at zero.
pub fn slot_cost(
    state: &SystemState,
    topo: &Topology,
    alloc: &Allocation,
) -> Result<CostBreakdown, ModelError> {
    state.validate(topo)?;
    if alloc.values().len() != topo.n_vars() {
        return Err(ModelError::Dimension {
            what: "allocation",
            expected: topo.n_vars(),
            got: alloc.values().len(),
        });
    }
    let violations = check_feasible(state, topo, alloc, FEASIBILITY_TOL);
    if !violations.is_empty() {
        return Err(ModelError::Infeasible(violations));
    }
    let n = topo.n_idcs();
    let power = topo.power();
    let mut energy_per_idc = Vec::with_capacity(n);
    for i in 0..n {
        let k = state.active_servers[i];
        let demand = (state.dsj_capacity[i] + alloc.idc_load(topo, i)).min(k);
        energy_per_idc.push(state.prices[i] * power.idc_power(k, demand)?);
    }
    let mut shift_per_link = vec![0.0; n * n];
    for from in 0..n {
        for to in 0..n {
            if from == to {
                continue;
            }
            let traffic = alloc.link_traffic(topo, from, to);
            let b = state.bandwidth(from, to);
            if traffic > 0.0 && b > 0.0 {
                shift_per_link[from * n + to] = topo.link_cost(from, to).value(traffic / b);
            }
        }
    }
    let energy_total: f64 = energy_per_idc.iter().sum();
    let shift_total: f64 = shift_per_link.iter().sum();
    Ok(CostBreakdown {
        energy_per_idc,
        shift_per_link,
        energy_total,
        shift_total,
        grand_total: energy_total + shift_total,
    })
}

/// Total service rate `Σ_i r_ij S_ij` of class `j`.
pub fn serve_rate(topo: &Topology, alloc: &Allocation, j: usize) -> f64 {
    topo.job_vars(j)
        .map(|k| topo.vars()[k].rate * alloc.values()[k])
        .sum()
}

pub fn serve_rates(topo: &Topology, alloc: &Allocation) -> Vec<f64> {
    (0..topo.n_jobs()).map(|j| serve_rate(topo, alloc, j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IdcSpec, JobClass, PowerModel, ShiftCostModel};
    use proptest::prelude::*;

    fn single(k: f64, s0: f64, price: f64) -> (Topology, SystemState) {
        let topo = Topology::with_uniform_links(
            vec![IdcSpec { k_max: k.max(1.0) }],
            vec![JobClass {
                origin: 0,
                serving_set: vec![0],
                rates: vec![1.0],
                mean_rate: 0.0,
                arrival_bound: 0.0,
            }],
            PowerModel::default(),
            ShiftCostModel::default(),
        )
        .unwrap();
        let state = SystemState {
            active_servers: vec![k],
            prices: vec![price],
            dsj_capacity: vec![s0],
            bandwidth: vec![0.0],
        };
        (topo, state)
    }

    fn pair() -> (Topology, SystemState) {
        let topo = Topology::with_uniform_links(
            vec![IdcSpec { k_max: 10.0 }, IdcSpec { k_max: 10.0 }],
            vec![JobClass {
                origin: 0,
                serving_set: vec![1],
                rates: vec![2.0],
                mean_rate: 0.0,
                arrival_bound: 0.0,
            }],
            PowerModel::default(),
            ShiftCostModel::default(),
        )
        .unwrap();
        let state = SystemState {
            active_servers: vec![10.0, 10.0],
            prices: vec![1.0, 1.0],
            dsj_capacity: vec![0.0, 0.0],
            bandwidth: vec![0.0, 4.0, 4.0, 0.0],
        };
        (topo, state)
    }

    #[test]
    fn idle_only() {
        let (topo, state) = single(10.0, 0.0, 1.0);
        let c = slot_cost(&state, &topo, &Allocation::zeros(&topo)).unwrap();
        assert_eq!(c.grand_total, 5.0);
    }

    #[test]
    fn dsj_plus_dtj_energy() {
        let (topo, state) = single(10.0, 2.0, 2.0);
        let a = Allocation::from_values(&topo, vec![3.0]).unwrap();
        let c = slot_cost(&state, &topo, &a).unwrap();
        // 2 * (5 + 0.5 * 25 / 10)
        assert!((c.energy_total - 12.5).abs() < 1e-12);
        assert_eq!(c.shift_total, 0.0);
    }

    #[test]
    fn shifted_traffic_is_charged() {
        let (topo, state) = pair();
        let a = Allocation::from_values(&topo, vec![1.0]).unwrap();
        let c = slot_cost(&state, &topo, &a).unwrap();
        assert!((c.shift_per_link[1] - 5.0 / 6.0).abs() < 1e-12);
        assert!((c.shift_total - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(a.shifted(&topo, 0, 0, 1), 2.0);
    }

    #[test]
    fn infeasible_allocation_lists_violations() {
        let (topo, state) = pair();
        let a = Allocation::from_values(&topo, vec![3.0]).unwrap();
        match slot_cost(&state, &topo, &a) {
            Err(ModelError::Infeasible(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].kind, ViolationKind::Bandwidth { from: 0, to: 1 });
                assert!((v[0].excess - 2.0).abs() < 1e-12);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        let a = Allocation::from_values(&topo, vec![-1.0]).unwrap();
        assert!(slot_cost(&state, &topo, &a).is_err());
    }

    #[test]
    fn closed_link_admits_nothing() {
        let (topo, mut state) = pair();
        state.bandwidth[1] = 0.0;
        let zero = Allocation::zeros(&topo);
        assert_eq!(slot_cost(&state, &topo, &zero).unwrap().shift_total, 0.0);
        let a = Allocation::from_values(&topo, vec![0.1]).unwrap();
        assert!(slot_cost(&state, &topo, &a).is_err());
    }

    #[test]
    fn serve_rate_sums_over_serving_set() {
        let topo = Topology::with_uniform_links(
            vec![IdcSpec { k_max: 10.0 }, IdcSpec { k_max: 10.0 }],
            vec![JobClass {
                origin: 0,
                serving_set: vec![0, 1],
                rates: vec![2.0, 3.0],
                mean_rate: 0.0,
                arrival_bound: 0.0,
            }],
            PowerModel::default(),
            ShiftCostModel::default(),
        )
        .unwrap();
        assert_eq!(serve_rate(&topo, &Allocation::zeros(&topo), 0), 0.0);
        let a = Allocation::from_values(&topo, vec![1.0, 1.0]).unwrap();
        assert_eq!(serve_rate(&topo, &a, 0), 5.0);
        assert_eq!(a.get(&topo, 1, 0), 1.0);
    }

    proptest! {
        #[test]
        fn idc_power_is_convex(k in 1.0f64..100.0, fa in 0.0f64..1.0, fb in 0.0f64..1.0, t in 0.0f64..1.0) {
            let m = PowerModel::default();
            let (a, b) = (fa * k, fb * k);
            let mid = m.idc_power(k, t * a + (1.0 - t) * b).unwrap();
            let comb = t * m.idc_power(k, a).unwrap() + (1.0 - t) * m.idc_power(k, b).unwrap();
            prop_assert!(mid <= comb + 1e-9);
        }

        #[test]
        fn energy_homogeneous_in_price(c in 0.01f64..100.0, s in 0.0f64..1.0) {
            let (topo, state) = pair();
            let a = Allocation::from_values(&topo, vec![s]).unwrap();
            let base = slot_cost(&state, &topo, &a).unwrap();
            let scaled = slot_cost(&state.scaled_prices(c), &topo, &a).unwrap();
            prop_assert!((scaled.energy_total - c * base.energy_total).abs() <= 1e-12 * scaled.energy_total.abs().max(1.0));
            prop_assert_eq!(scaled.shift_total, base.shift_total);
        }

        #[test]
        fn totals_match_components(s in 0.0f64..2.0, p0 in 0.0f64..10.0, p1 in 0.0f64..10.0) {
            let (topo, mut state) = pair();
            state.prices = vec![p0, p1];
            let a = Allocation::from_values(&topo, vec![s]).unwrap();
            let c = slot_cost(&state, &topo, &a).unwrap();
            let m = topo.power();
            let e0 = p0 * m.idc_power(10.0, 0.0).unwrap();
            let e1 = p1 * m.idc_power(10.0, s).unwrap();
            let sh = if s > 0.0 { ShiftCostModel::default().value(2.0 * s / 4.0) } else { 0.0 };
            prop_assert_eq!(c.energy_per_idc.clone(), vec![e0, e1]);
            prop_assert_eq!(c.energy_total, c.energy_per_idc.iter().sum::<f64>());
            prop_assert_eq!(c.shift_total, sh);
            prop_assert_eq!(c.grand_total, c.energy_total + c.shift_total);
        }
    }
}
