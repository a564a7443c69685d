use rand::Rng;
use rand_distr::{Distribution, Poisson, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::model::{IdcSpec, PowerModel, ShiftCostModel, SystemState, Topology};
use crate::rng::{substream, Stream};
use crate::sim::{ArrivalSource, Scenario, StateSource};

use super::{check_range, draw, ingest_packet_log, load_prices, random_jobs, Packet, PacketLogConfig, PriceRow, TraceError};

/// Packet-size bins in Mbit with the share of all bytes falling in each.
/// Thresholds at 10, 50, 100 and 150 Mbit leave 90%, 70%, 50% and 10% of
/// the bytes above the threshold.
const SIZE_BINS: [(f64, f64, f64); 5] = [
    (5.0, 10.0, 0.1),
    (10.0, 50.0, 0.2),
    (50.0, 100.0, 0.2),
    (100.0, 150.0, 0.4),
    (150.0, 250.0, 0.1),
];

/// A bursty packet log: slots alternate between ON and OFF periods (a
/// two-state Markov chain), and ON slots carry Poisson packet counts under
/// a daily sinusoidal envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticLogConfig {
    pub slots: usize,
    pub slot_length: f64,
    /// Long-run mean traffic per slot, all sizes, in Mbit.
    pub mean_mbit_per_slot: f64,
    /// Stationary fraction of ON slots.
    pub on_fraction: f64,
    /// Mean length of an ON period in slots.
    pub mean_on_slots: f64,
    /// Relative amplitude of the daily envelope, in `[0, 1)`.
    pub diurnal_amplitude: f64,
    /// Hour of day at which the envelope peaks.
    pub peak_hour: f64,
    pub seed: u64,
}

impl Default for SyntheticLogConfig {
    fn default() -> Self {
        Self {
            slots: 4320,
            slot_length: 20.0,
            mean_mbit_per_slot: 900.0,
            on_fraction: 0.25,
            mean_on_slots: 15.0,
            diurnal_amplitude: 0.5,
            peak_hour: 14.0,
            seed: 2011,
        }
    }
}

impl SyntheticLogConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        let ok = self.slots > 0
            && self.slot_length.is_finite()
            && self.slot_length > 0.0
            && self.mean_mbit_per_slot.is_finite()
            && self.mean_mbit_per_slot > 0.0
            && self.on_fraction > 0.0
            && self.on_fraction < 1.0
            && self.mean_on_slots >= 1.0
            && (0.0..1.0).contains(&self.diurnal_amplitude)
            && self.peak_hour.is_finite();
        if ok {
            Ok(())
        } else {
            Err(TraceError::Invalid(format!("bad synthetic log settings: {self:?}")))
        }
    }
}

/// Generates the packet log described by `cfg`, sorted by time, with
/// millisecond timestamps.
pub fn synthetic_packet_log(cfg: &SyntheticLogConfig) -> Result<Vec<Packet>, TraceError> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, Stream::Trace, 0);
    let mean_size = SIZE_BINS.iter().map(|b| b.2).sum::<f64>()
        / SIZE_BINS.iter().map(|(lo, hi, share)| share / ((lo + hi) / 2.0)).sum::<f64>();
    let bin_pick = WeightedIndex::new(SIZE_BINS.iter().map(|(lo, hi, share)| share / ((lo + hi) / 2.0)))
        .expect("bin weights are positive");
    let on_count = cfg.mean_mbit_per_slot / mean_size / cfg.on_fraction;
    let leave_on = 1.0 / cfg.mean_on_slots;
    let enter_on = (leave_on * cfg.on_fraction / (1.0 - cfg.on_fraction)).min(1.0);

    let ms_per_slot = (cfg.slot_length * 1000.0).round() as u64;
    let mut on = rng.gen_bool(cfg.on_fraction);
    let mut packets = Vec::new();
    for t in 0..cfg.slots {
        if on {
            let hour = t as f64 * cfg.slot_length / 3600.0;
            let phase = 2.0 * std::f64::consts::PI * (hour - cfg.peak_hour) / 24.0;
            let envelope = 1.0 + cfg.diurnal_amplitude * phase.cos();
            let count = Poisson::new(on_count * envelope).expect("positive mean").sample(&mut rng) as usize;
            let mut slot: Vec<Packet> = (0..count)
                .map(|_| {
                    let (lo, hi, _) = SIZE_BINS[bin_pick.sample(&mut rng)];
                    let mbit = rng.gen_range(lo..=hi);
                    let ms = t as u64 * ms_per_slot + rng.gen_range(0..ms_per_slot);
                    Packet {
                        timestamp_s: ms as f64 / 1000.0,
                        size_bytes: (mbit * 1e6 / 8.0).round() as u64,
                    }
                })
                .collect();
            slot.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
            packets.extend(slot);
        }
        on = if on { !rng.gen_bool(leave_on) } else { rng.gen_bool(enter_on) };
    }
    if packets.is_empty() {
        return Err(TraceError::Empty("generated packet log"));
    }
    Ok(packets)
}

/// Hourly prices for each region (cents per kWh-like units): a regional
/// base level in `[3, 6]` with a daily cycle whose peak shifts by region,
/// plus ±10% noise. Prices are rounded to 1e-3.
pub fn synthetic_prices(regions: &[String], hours: usize, seed: u64) -> Vec<PriceRow> {
    let mut rng = substream(seed, Stream::Trace, 1);
    let n = regions.len().max(1);
    let mut rows = Vec::with_capacity(regions.len() * hours);
    for (k, region) in regions.iter().enumerate() {
        let base = rng.gen_range(3.0..=6.0);
        let peak = 15.0 + 6.0 * k as f64 / n as f64;
        for hour in 0..hours {
            let phase = 2.0 * std::f64::consts::PI * (hour as f64 - peak) / 24.0;
            let noise = rng.gen_range(0.9..=1.1);
            let price = (base * (1.0 + 0.4 * phase.cos()) * noise).max(0.5);
            rows.push(PriceRow {
                region: region.clone(),
                hour,
                price: (price * 1e3).round() / 1e3,
            });
        }
    }
    rows
}

/// Packet log plus hourly prices covering it, both derived from `cfg.seed`.
pub fn synthetic_trace(cfg: &SyntheticLogConfig, regions: &[String]) -> Result<(Vec<Packet>, Vec<PriceRow>), TraceError> {
    let packets = synthetic_packet_log(cfg)?;
    let hours = (cfg.slots as f64 * cfg.slot_length / 3600.0).ceil() as usize;
    Ok((packets, synthetic_prices(regions, hours.max(1), cfg.seed)))
}

pub fn default_regions() -> Vec<String> {
    ["east", "west", "central", "south", "north"].iter().map(|s| s.to_string()).collect()
}

/// Multi-IDC scenario driven by one packet log. Each job class replays the
/// delay-tolerant stream and each IDC the delay-sensitive stream, starting
/// at its own cyclic offset into the log. Capacities, bandwidths and unit
/// rates are drawn per slot / per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub packet: PacketLogConfig,
    pub n_idcs: usize,
    pub n_jobs: usize,
    /// Active servers per IDC and slot.
    pub capacity: [f64; 2],
    /// Residual bandwidth per ordered link and slot.
    pub bandwidth: [f64; 2],
    /// Unit rates are uniform on `[2r/3, 4r/3]` around `packet.dtj_unit_rate`.
    pub serving_prob: f64,
    /// Price region of each IDC.
    pub regions: Vec<String>,
    /// Slot offset of each job's arrival stream; evenly spread by default.
    pub job_offsets: Option<Vec<usize>>,
    /// Slot offset of each IDC's delay-sensitive stream; evenly spread by default.
    pub idc_offsets: Option<Vec<usize>>,
    /// Slots to simulate; defaults to the log length.
    pub horizon: Option<usize>,
    pub idle_power: f64,
    pub shift_cost: ShiftCostModel,
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            packet: PacketLogConfig::default(),
            n_idcs: 5,
            n_jobs: 10,
            capacity: [1000.0, 1200.0],
            bandwidth: [1000.0, 1500.0],
            serving_prob: 0.5,
            regions: default_regions(),
            job_offsets: None,
            idc_offsets: None,
            horizon: None,
            idle_power: 0.5,
            shift_cost: ShiftCostModel::default(),
            seed: 1,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        self.packet.validate()?;
        if self.n_idcs == 0 || self.n_jobs == 0 {
            return Err(TraceError::Invalid("n_idcs and n_jobs must be >= 1".into()));
        }
        check_range("capacity", self.capacity)?;
        check_range("bandwidth", self.bandwidth)?;
        if self.regions.len() != self.n_idcs {
            return Err(TraceError::Invalid(format!(
                "{} price regions for {} IDCs",
                self.regions.len(),
                self.n_idcs
            )));
        }
        for (what, offsets, len) in [("job", &self.job_offsets, self.n_jobs), ("IDC", &self.idc_offsets, self.n_idcs)] {
            if offsets.as_ref().is_some_and(|o| o.len() != len) {
                return Err(TraceError::Invalid(format!("need one {what} offset per {what}")));
            }
        }
        if !(self.serving_prob > 0.0 && self.serving_prob <= 1.0) {
            return Err(TraceError::Invalid("serving_prob must be in (0, 1]".into()));
        }
        if self.horizon == Some(0) {
            return Err(TraceError::Invalid("horizon must be >= 1".into()));
        }
        PowerModel::new(1.0 - self.idle_power, 2.0)?;
        Ok(())
    }
}

fn spread(count: usize, len: usize, shift: usize) -> Vec<usize> {
    (0..count).map(|k| (k * len / count + shift) % len).collect()
}

/// Builds the trace scenario. Delay-sensitive demand above an IDC's active
/// capacity is clipped (with one summary warning). Each class's mean rate
/// is its empirical mean over the horizon and its bound the largest
/// single-slot arrival.
pub fn build_trace_scenario(packets: &[Packet], prices: &[PriceRow], cfg: &TraceConfig) -> Result<Scenario, TraceError> {
    cfg.validate()?;
    let series = ingest_packet_log(packets, &cfg.packet)?;
    let len = series.len();
    let horizon = cfg.horizon.unwrap_or(len);
    let job_off = cfg.job_offsets.clone().unwrap_or_else(|| spread(cfg.n_jobs, len, 0));
    let idc_off = cfg
        .idc_offsets
        .clone()
        .unwrap_or_else(|| spread(cfg.n_idcs, len, len / (2 * cfg.n_idcs)));
    let price_rows = load_prices(prices, &cfg.regions, cfg.packet.slot_length, horizon)?;

    let mut rng = substream(cfg.seed, Stream::Scenario, 0);
    let r = cfg.packet.dtj_unit_rate;
    let mut jobs = random_jobs(&mut rng, cfg.n_idcs, cfg.n_jobs, cfg.serving_prob, [2.0 * r / 3.0, 4.0 * r / 3.0]);

    let n = cfg.n_idcs;
    let mut clipped = 0usize;
    let states: Vec<SystemState> = (0..horizon)
        .map(|t| {
            let active_servers: Vec<f64> = (0..n).map(|_| draw(&mut rng, cfg.capacity).round()).collect();
            let bandwidth = (0..n * n)
                .map(|l| if l / n == l % n { 0.0 } else { draw(&mut rng, cfg.bandwidth) })
                .collect();
            let dsj_capacity = (0..n)
                .map(|i| {
                    let d = series.dsj_demand[(t + idc_off[i]) % len];
                    if d > active_servers[i] {
                        clipped += 1;
                        active_servers[i]
                    } else {
                        d
                    }
                })
                .collect();
            SystemState {
                active_servers,
                prices: price_rows[t].clone(),
                dsj_capacity,
                bandwidth,
            }
        })
        .collect();
    if clipped > 0 {
        log::warn!(
            "delay-sensitive demand exceeded active capacity in {clipped} of {} IDC-slots; clipped",
            horizon * n
        );
    }

    let arrivals: Vec<Vec<f64>> = (0..horizon)
        .map(|t| job_off.iter().map(|&o| series.dtj_arrivals[(t + o) % len]).collect())
        .collect();
    for (j, job) in jobs.iter_mut().enumerate() {
        job.mean_rate = arrivals.iter().map(|a| a[j]).sum::<f64>() / horizon as f64;
        job.arrival_bound = arrivals.iter().map(|a| a[j]).fold(0.0, f64::max);
    }
    let topo = Topology::with_uniform_links(
        vec![IdcSpec { k_max: cfg.capacity[1].round().max(1.0) }; n],
        jobs,
        PowerModel::new(1.0 - cfg.idle_power, 2.0)?,
        cfg.shift_cost.clone(),
    )?;
    Ok(Scenario {
        topo,
        states: StateSource::Series(states),
        arrivals: ArrivalSource::Series(arrivals),
        horizon,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traces::{parse_packet_log, write_packet_log};

    fn small_log() -> SyntheticLogConfig {
        SyntheticLogConfig {
            slots: 540,
            ..SyntheticLogConfig::default()
        }
    }

    #[test]
    fn log_is_deterministic_sorted_and_round_trips() {
        let a = synthetic_packet_log(&small_log()).unwrap();
        assert_eq!(a, synthetic_packet_log(&small_log()).unwrap());
        assert!(a.windows(2).all(|w| w[0].timestamp_s <= w[1].timestamp_s));
        let mut buf = Vec::new();
        write_packet_log(&a, &mut buf).unwrap();
        assert_eq!(parse_packet_log(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn threshold_shares_follow_the_size_mix() {
        let log = synthetic_packet_log(&SyntheticLogConfig::default()).unwrap();
        for (threshold, share) in [(10.0, 0.9), (50.0, 0.7), (100.0, 0.5), (150.0, 0.1)] {
            let cfg = PacketLogConfig {
                size_threshold_mb: threshold,
                ..PacketLogConfig::default()
            };
            let s = ingest_packet_log(&log, &cfg).unwrap();
            assert!((s.dtj_share() - share).abs() < 0.02, "threshold {threshold}: {}", s.dtj_share());
        }
        let s = ingest_packet_log(&log, &PacketLogConfig::default()).unwrap();
        let mean = (0..s.len()).map(|t| s.dsj_demand[t] + s.dtj_arrivals[t]).sum::<f64>() / s.len() as f64;
        assert!((mean / 900.0 - 1.0).abs() < 0.25, "mean load {mean}");
        let zero = s.dtj_bytes.iter().zip(&s.dsj_bytes).filter(|(a, b)| **a + **b == 0).count();
        assert!(zero as f64 / s.len() as f64 > 0.5, "OFF slots should dominate");
    }

    #[test]
    fn prices_are_hourly_and_distinct() {
        let rows = synthetic_prices(&default_regions(), 24, 3);
        assert_eq!(rows.len(), 120);
        assert!(rows.iter().all(|r| r.price > 1.0 && r.price < 10.0));
        let p = load_prices(&rows, &default_regions(), 20.0, 4320).unwrap();
        assert_eq!(p.len(), 4320);
        assert!(p[0].windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn trace_scenario_replays_offset_streams() {
        let log = synthetic_packet_log(&small_log()).unwrap();
        let prices = synthetic_prices(&default_regions(), 24, 3);
        let cfg = TraceConfig {
            packet: PacketLogConfig {
                size_threshold_mb: 100.0,
                ..PacketLogConfig::default()
            },
            ..TraceConfig::default()
        };
        let sc = build_trace_scenario(&log, &prices, &cfg).unwrap();
        sc.validate().unwrap();
        let series = ingest_packet_log(&log, &cfg.packet).unwrap();
        let len = series.len();
        assert_eq!(sc.horizon, len);
        let ArrivalSource::Series(arr) = &sc.arrivals else { panic!() };
        let offsets = spread(10, len, 0);
        for t in [0, 17, len - 1] {
            for j in 0..10 {
                assert_eq!(arr[t][j], series.dtj_arrivals[(t + offsets[j]) % len]);
            }
        }
        let StateSource::Series(states) = &sc.states else { panic!() };
        for s in states {
            for i in 0..5 {
                assert!((1000.0..=1200.0).contains(&s.active_servers[i]));
                assert!(s.dsj_capacity[i] <= s.active_servers[i]);
            }
        }
        let means = sc.mean_arrivals();
        for (j, job) in sc.topo.jobs().iter().enumerate() {
            assert!((job.mean_rate - means[j]).abs() < 1e-9);
            assert!(job.rates.iter().all(|r| (5.0..=10.0).contains(r)));
        }
        assert_eq!(sc, build_trace_scenario(&log, &prices, &cfg).unwrap());
    }

    #[test]
    fn trace_config_errors() {
        let log = synthetic_packet_log(&small_log()).unwrap();
        let prices = synthetic_prices(&default_regions(), 1, 3);
        // one hour of prices cannot cover 540 slots of 20 s
        assert!(matches!(
            build_trace_scenario(&log, &prices, &TraceConfig::default()),
            Err(TraceError::MissingHour { .. })
        ));
        let cfg = TraceConfig {
            regions: vec!["east".into()],
            ..TraceConfig::default()
        };
        assert!(build_trace_scenario(&log, &prices, &cfg).is_err());
        let cfg = TraceConfig {
            job_offsets: Some(vec![0; 3]),
            ..TraceConfig::default()
        };
        assert!(build_trace_scenario(&log, &prices, &cfg).is_err());
    }
}
