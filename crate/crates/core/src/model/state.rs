use serde::{Deserialize, Serialize};

use super::{ModelError, Topology};

/// The exogenous world in one slot.
///
/// `bandwidth` is row-major over ordered IDC pairs: entry `from * N + to`
/// is the residual bandwidth from `from` to `to`. A zero entry means the
/// link is unavailable to delay-tolerant traffic in this slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub active_servers: Vec<f64>,
    pub prices: Vec<f64>,
    pub dsj_capacity: Vec<f64>,
    pub bandwidth: Vec<f64>,
}

impl SystemState {
    pub fn n_idcs(&self) -> usize {
        self.active_servers.len()
    }

    pub fn bandwidth(&self, from: usize, to: usize) -> f64 {
        self.bandwidth[from * self.n_idcs() + to]
    }

    /// Capacity left after delay-sensitive work, clipped at zero.
    pub fn residual_capacity(&self, i: usize) -> f64 {
        (self.active_servers[i] - self.dsj_capacity[i]).max(0.0)
    }

    /// Checks shapes, signs and `S_i0 <= K_i <= K_i^max`.
    pub fn validate(&self, topo: &Topology) -> Result<(), ModelError> {
        let n = topo.n_idcs();
        for (what, len, expected) in [
            ("active servers", self.active_servers.len(), n),
            ("prices", self.prices.len(), n),
            ("dsj capacity", self.dsj_capacity.len(), n),
            ("bandwidth", self.bandwidth.len(), n * n),
        ] {
            if len != expected {
                return Err(ModelError::Dimension { what, expected, got: len });
            }
        }
        for i in 0..n {
            let k = super::nonneg("active servers", self.active_servers[i])?;
            super::nonneg("price", self.prices[i])?;
            let s0 = super::nonneg("dsj capacity", self.dsj_capacity[i])?;
            if k > topo.idcs()[i].k_max {
                return Err(ModelError::Invalid(format!(
                    "IDC {i}: {k} active servers exceed k_max {}",
                    topo.idcs()[i].k_max
                )));
            }
            if s0 > k {
                return Err(ModelError::Invalid(format!(
                    "IDC {i}: delay-sensitive demand {s0} exceeds {k} active servers"
                )));
            }
        }
        for &b in &self.bandwidth {
            super::nonneg("bandwidth", b)?;
        }
        Ok(())
    }

    /// Clips delay-sensitive demand to the active capacity, warning once per
    /// clipped IDC. Delay-sensitive work keeps priority; only the residual
    /// disappears.
    pub fn clip_dsj(&mut self) -> usize {
        let mut clipped = 0;
        for i in 0..self.n_idcs() {
            if self.dsj_capacity[i] > self.active_servers[i] {
                log::warn!(
                    "IDC {i}: delay-sensitive demand {} above capacity {}, clipped",
                    self.dsj_capacity[i],
                    self.active_servers[i]
                );
                self.dsj_capacity[i] = self.active_servers[i];
                clipped += 1;
            }
        }
        clipped
    }

    /// Multiplies every price by `c`.
    pub fn scaled_prices(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.prices.iter_mut().for_each(|p| *p *= c);
        s
    }
}
