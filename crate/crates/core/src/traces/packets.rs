use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TraceError;

/// One received packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub timestamp_s: f64,
    pub size_bytes: u64,
}

impl Packet {
    pub fn size_mbit(&self) -> f64 {
        bytes_to_mbit(self.size_bytes)
    }
}

fn bytes_to_mbit(bytes: u64) -> f64 {
    bytes as f64 * 8.0 / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketLogConfig {
    /// Slot length in seconds. Slot `t` covers `[t L, (t+1) L)`.
    pub slot_length: f64,
    /// Packets above this size (Mbit) are delay-tolerant.
    pub size_threshold_mb: f64,
    /// Capacity units needed per Mbit of delay-sensitive traffic.
    pub dsj_capacity_per_unit: f64,
    /// Mean delay-tolerant traffic served per capacity unit.
    pub dtj_unit_rate: f64,
    /// Whether a packet exactly at the threshold counts as delay-sensitive.
    pub threshold_is_dsj: bool,
}

impl Default for PacketLogConfig {
    fn default() -> Self {
        Self {
            slot_length: 20.0,
            size_threshold_mb: 50.0,
            dsj_capacity_per_unit: 1.0,
            dtj_unit_rate: 7.5,
            threshold_is_dsj: true,
        }
    }
}

impl PacketLogConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        let positive = |what: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(TraceError::Invalid(format!("{what} must be > 0, got {x}")))
            }
        };
        positive("slot_length", self.slot_length)?;
        positive("size_threshold_mb", self.size_threshold_mb)?;
        positive("dsj_capacity_per_unit", self.dsj_capacity_per_unit)?;
        positive("dtj_unit_rate", self.dtj_unit_rate)
    }

    fn is_dsj(&self, size_mbit: f64) -> bool {
        if self.threshold_is_dsj {
            size_mbit <= self.size_threshold_mb
        } else {
            size_mbit < self.size_threshold_mb
        }
    }
}

/// Per-slot traffic split by the size threshold. Byte totals are kept as
/// integers so the split partitions the raw traffic exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSeries {
    pub dsj_bytes: Vec<u64>,
    pub dtj_bytes: Vec<u64>,
    /// Delay-sensitive demand in capacity units.
    pub dsj_demand: Vec<f64>,
    /// Delay-tolerant arrivals in Mbit.
    pub dtj_arrivals: Vec<f64>,
}

impl PacketSeries {
    pub fn len(&self) -> usize {
        self.dsj_bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dsj_bytes.is_empty()
    }

    /// Share of all bytes classified as delay-tolerant.
    pub fn dtj_share(&self) -> f64 {
        let dtj: u64 = self.dtj_bytes.iter().sum();
        let dsj: u64 = self.dsj_bytes.iter().sum();
        if dtj + dsj == 0 {
            0.0
        } else {
            dtj as f64 / (dtj + dsj) as f64
        }
    }
}

/// Buckets packets into slots of the configured length, counted from time
/// zero, up to and including the slot of the latest packet.
pub fn ingest_packet_log(packets: &[Packet], cfg: &PacketLogConfig) -> Result<PacketSeries, TraceError> {
    cfg.validate()?;
    if packets.is_empty() {
        return Err(TraceError::Empty("packet log"));
    }
    let slot_of = |p: &Packet| (p.timestamp_s / cfg.slot_length).floor() as usize;
    let n = packets.iter().map(slot_of).max().unwrap_or(0) + 1;
    let mut dsj_bytes = vec![0u64; n];
    let mut dtj_bytes = vec![0u64; n];
    for p in packets {
        let t = slot_of(p);
        if cfg.is_dsj(p.size_mbit()) {
            dsj_bytes[t] += p.size_bytes;
        } else {
            dtj_bytes[t] += p.size_bytes;
        }
    }
    Ok(PacketSeries {
        dsj_demand: dsj_bytes.iter().map(|&b| bytes_to_mbit(b) * cfg.dsj_capacity_per_unit).collect(),
        dtj_arrivals: dtj_bytes.iter().map(|&b| bytes_to_mbit(b)).collect(),
        dsj_bytes,
        dtj_bytes,
    })
}

#[derive(Debug, Deserialize, Serialize)]
struct PacketRecord {
    timestamp_s: f64,
    size_bytes: u64,
}

/// Parses `timestamp_s,size_bytes` CSV with a header row. Timestamps must
/// be finite and non-negative; order does not matter.
pub fn parse_packet_log<R: Read>(reader: R) -> Result<Vec<Packet>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| TraceError::Parse { line: 1, msg: e.to_string() })?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TraceError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parsed: PacketRecord = rec
            .deserialize(Some(&headers))
            .map_err(|e| TraceError::Parse { line, msg: e.to_string() })?;
        if !(parsed.timestamp_s.is_finite() && parsed.timestamp_s >= 0.0) {
            return Err(TraceError::Parse {
                line,
                msg: format!("timestamp {} must be finite and >= 0", parsed.timestamp_s),
            });
        }
        out.push(Packet {
            timestamp_s: parsed.timestamp_s,
            size_bytes: parsed.size_bytes,
        });
    }
    if out.is_empty() {
        return Err(TraceError::Empty("packet log"));
    }
    Ok(out)
}

pub fn read_packet_log(path: &Path) -> Result<Vec<Packet>, TraceError> {
    let file = std::fs::File::open(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_packet_log(std::io::BufReader::new(file))
}

/// Writes packets as CSV with millisecond timestamps.
pub fn write_packet_log<W: Write>(packets: &[Packet], writer: W) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "timestamp_s,size_bytes")?;
    for p in packets {
        writeln!(w, "{:.3},{}", p.timestamp_s, p.size_bytes)?;
    }
    w.flush()
}
