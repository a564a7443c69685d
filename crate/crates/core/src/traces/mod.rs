//! Scenario construction: the synthetic ergodic generator, packet-log
//! ingestion with size-threshold job classification, hourly price series,
//! and the trace-driven multi-datacenter scenario built from them.

mod packets;
mod prices;
mod synthetic;
mod trace;

pub use packets::{ingest_packet_log, parse_packet_log, read_packet_log, write_packet_log, Packet, PacketLogConfig, PacketSeries};
pub use prices::{load_prices, parse_prices, read_prices, write_prices, PriceRow};
pub use synthetic::{gen_synthetic, SyntheticConfig};
pub use trace::{build_trace_scenario, default_regions, synthetic_packet_log, synthetic_prices, synthetic_trace, SyntheticLogConfig, TraceConfig};

use rand::Rng;
use thiserror::Error;

use crate::model::{JobClass, ModelError};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("{0} contains no records")]
    Empty(&'static str),
    #[error("region {0:?} not found in the price file")]
    UnknownRegion(String),
    #[error("region {region:?} has no price for hour {hour}")]
    MissingHour { region: String, hour: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub(crate) fn check_range(what: &str, r: [f64; 2]) -> Result<(), TraceError> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] >= 0.0 && r[0] <= r[1]) {
        return Err(TraceError::Invalid(format!("{what} range {r:?} must be ordered and >= 0")));
    }
    Ok(())
}

pub(crate) fn draw<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

/// Random serving sets (each IDC kept with probability `p`, redrawn when
/// empty), origins uniform within the serving set, and uniform rates.
/// Arrival statistics are left at zero.
pub(crate) fn random_jobs<R: Rng>(rng: &mut R, n_idcs: usize, n_jobs: usize, p: f64, rate: [f64; 2]) -> Vec<JobClass> {
    (0..n_jobs)
        .map(|_| {
            let serving_set = loop {
                let set: Vec<usize> = (0..n_idcs).filter(|_| rng.gen_bool(p)).collect();
                if !set.is_empty() {
                    break set;
                }
            };
            let origin = serving_set[rng.gen_range(0..serving_set.len())];
            let rates = serving_set.iter().map(|_| draw(rng, rate)).collect();
            JobClass {
                origin,
                serving_set,
                rates,
                mean_rate: 0.0,
                arrival_bound: 0.0,
            }
        })
        .collect()
}
