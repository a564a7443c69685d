use super::*;
use crate::controllers::{Bes, Qtf, Sstf};
use crate::model::{Allocation, IdcSpec, JobClass, PowerModel, ShiftCostModel};
use crate::rng::{substream, Stream};

fn single_idc(lambda: f64) -> Topology {
    Topology::with_uniform_links(
        vec![IdcSpec { k_max: 20.0 }],
        vec![
            JobClass { origin: 0, serving_set: vec![0], rates: vec![1.0], mean_rate: lambda, arrival_bound: 2.0 * lambda },
            JobClass { origin: 0, serving_set: vec![0], rates: vec![2.0], mean_rate: lambda, arrival_bound: 2.0 * lambda },
        ],
        PowerModel::default(),
        ShiftCostModel::default(),
    )
    .unwrap()
}

fn state(k: f64, s0: f64, price: f64) -> SystemState {
    SystemState {
        active_servers: vec![k],
        prices: vec![price],
        dsj_capacity: vec![s0],
        bandwidth: vec![0.0],
    }
}

fn scenario(lambda: f64, horizon: usize) -> Scenario {
    let dist = StateDistribution::uniform(vec![state(20.0, 2.0, 1.0), state(16.0, 6.0, 3.0)]).unwrap();
    Scenario {
        topo: single_idc(lambda),
        states: StateSource::Ergodic(dist),
        arrivals: ArrivalSource::Uniform,
        horizon,
        seed: 42,
    }
}

#[test]
fn single_state_is_always_drawn() {
    let dist = StateDistribution::uniform(vec![state(1.0, 0.0, 1.0)]).unwrap();
    let mut rng = substream(1, Stream::States, 0);
    for _ in 0..100 {
        assert_eq!(sample_state(&dist, &mut rng).0, 0);
    }
}

#[test]
fn state_frequencies_follow_probabilities() {
    let dist = StateDistribution::uniform(vec![state(1.0, 0.0, 1.0), state(2.0, 0.0, 1.0)]).unwrap();
    let mut rng = substream(5, Stream::States, 0);
    let n = 100_000;
    let hits = (0..n).filter(|_| sample_state(&dist, &mut rng).0 == 0).count();
    assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);

    let draw = |seed| {
        let mut rng = substream(seed, Stream::States, 0);
        (0..50).map(|_| sample_state(&dist, &mut rng).0).collect::<Vec<_>>()
    };
    assert_eq!(draw(9), draw(9));
}

#[test]
fn zero_arrivals_keep_queues_empty_and_cost_idle_plus_dsj() {
    let sc = scenario(0.0, 200);
    let s = run(&sc, &mut Qtf::new(1.0)).unwrap();
    assert!(s.queues.iter().flatten().all(|&q| q == 0.0));
    let dist = sc.distribution().unwrap();
    for c in &s.cost {
        let matches = dist.states.iter().any(|st| {
            let base = st.prices[0] * (0.5 * st.active_servers[0] + 0.5 * st.dsj_capacity[0].powi(2) / st.active_servers[0]);
            (c.grand_total - base).abs() < 1e-12
        });
        assert!(matches);
    }
    assert_eq!(s.aggregates.overall_delay, None);
}

#[test]
fn small_v_serves_arrivals_within_one_slot() {
    let sc = Scenario {
        states: StateSource::Series(vec![state(20.0, 2.0, 1.0); 2000]),
        ..scenario(4.0, 2000)
    };
    let s = run(&sc, &mut Qtf::new(1e-3)).unwrap();
    let d = s.aggregates.overall_delay.unwrap();
    assert!((d - 1.0).abs() < 0.01, "delay {d}");
}

#[test]
fn runs_are_reproducible_and_accounted() {
    let sc = scenario(3.0, 500);
    let a = run(&sc, &mut Qtf::new(2.0)).unwrap();
    let b = run(&sc, &mut Qtf::new(2.0)).unwrap();
    assert_eq!(a, b);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    write_metrics_csv(&a, &mut csv_a).unwrap();
    write_metrics_csv(&b, &mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 501);

    replay_check(&a).unwrap();
    assert!(conservation_error(&a) < 1e-9);
    assert_eq!(compute_aggregates(&a, 0.01), a.aggregates);
}

#[test]
fn compare_shares_realizations() {
    let sc = scenario(3.0, 300);
    let out = compare(
        &sc,
        vec![Box::new(Qtf::new(1.0)), Box::new(Bes), Box::new(Sstf::new(vec![3.0, 3.0], 0.05).unwrap())],
        &RunOptions::default(),
    );
    let series: Vec<&MetricsSeries> = out.iter().map(|o| o.result.as_ref().unwrap()).collect();
    assert_eq!(series[0].arrivals, series[1].arrivals);
    assert_eq!(series[0].arrivals, series[2].arrivals);
    for s in &series {
        replay_check(s).unwrap();
    }
    let rows: Vec<CompareRow> = out.iter().map(|o| CompareRow::from_outcome(o, None)).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.error.is_none()));
}

struct Greedy;

impl Controller for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn decide(&mut self, ctx: &SlotContext) -> Result<Allocation, ControlError> {
        Ok(Allocation::from_values(ctx.topo, vec![1e6; ctx.topo.n_vars()])?)
    }
}

#[test]
fn infeasible_allocations_abort_the_run() {
    let sc = scenario(1.0, 10);
    match run(&sc, &mut Greedy) {
        Err(SimError::Infeasible { slot, .. }) => assert_eq!(slot, 0),
        other => panic!("{other:?}"),
    }
    let out = compare(&sc, vec![Box::new(Greedy), Box::new(Bes)], &RunOptions::default());
    assert!(out[0].result.is_err());
    assert!(out[1].result.is_ok());
}

#[test]
fn overload_is_flagged_unstable() {
    // mean arrivals 30 per class against at most 18 * 1 + ... capacity
    let sc = scenario(30.0, 2000);
    let s = run(&sc, &mut Bes).unwrap();
    assert!(s.aggregates.unstable);
    let ok = run(&scenario(1.0, 2000), &mut Bes).unwrap();
    assert!(!ok.aggregates.unstable);
}

#[test]
fn windowed_rates_cover_the_horizon() {
    let served = vec![vec![1.0, 0.0], vec![3.0, 4.0], vec![2.0, 2.0], vec![2.0, 2.0]];
    let w = windowed_rates(&served, &[2.0, 2.0], 4).unwrap();
    assert_eq!(w, vec![vec![1.0, 1.0]]);
    let w1 = windowed_rates(&served, &[2.0, 2.0], 1).unwrap();
    assert_eq!(w1.len(), 4);
    assert_eq!(zero_fraction(&w1), 1.0 / 8.0);
    assert!(windowed_rates(&served, &[2.0, 2.0], 5).is_err());
    assert_eq!(coefficient_of_variation(&[vec![1.0], vec![1.0]]), 0.0);
}

#[test]
fn series_mode_checks_lengths() {
    let sc = Scenario {
        states: StateSource::Series(vec![state(20.0, 2.0, 1.0); 5]),
        ..scenario(1.0, 10)
    };
    assert!(matches!(run(&sc, &mut Bes), Err(SimError::Invalid(_))));
}
