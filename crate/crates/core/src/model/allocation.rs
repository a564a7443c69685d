use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ModelError, Topology};

/// Capacity assigned to each `(IDC, class)` pair the topology allows, laid
/// out in [`Topology::vars`] order. Pairs outside a class's serving set have
/// no slot, so they cannot carry capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    values: Vec<f64>,
}

impl Allocation {
    pub fn zeros(topo: &Topology) -> Self {
        Self {
            values: vec![0.0; topo.n_vars()],
        }
    }

    pub fn from_values(topo: &Topology, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != topo.n_vars() {
            return Err(ModelError::Dimension {
                what: "allocation",
                expected: topo.n_vars(),
                got: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `S_ij`, zero when `i` cannot serve `j`.
    pub fn get(&self, topo: &Topology, idc: usize, job: usize) -> f64 {
        topo.var_index(idc, job).map_or(0.0, |k| self.values[k])
    }

    pub fn set(&mut self, topo: &Topology, idc: usize, job: usize, value: f64) -> Result<(), ModelError> {
        let k = topo.var_index(idc, job).ok_or_else(|| {
            ModelError::Invalid(format!("IDC {idc} cannot serve job {job}"))
        })?;
        self.values[k] = value;
        Ok(())
    }

    /// Capacity handed to delay-tolerant classes at IDC `i`.
    pub fn idc_load(&self, topo: &Topology, i: usize) -> f64 {
        topo.idc_vars(i).iter().map(|&k| self.values[k]).sum()
    }

    /// Traffic shifted over `from -> to`: `Σ r_{to,j} S_{to,j}` for the
    /// classes originating at `from`.
    pub fn link_traffic(&self, topo: &Topology, from: usize, to: usize) -> f64 {
        topo.link_vars(from, to)
            .iter()
            .map(|&k| topo.vars()[k].rate * self.values[k])
            .sum()
    }

    /// Shifted traffic `D_{j,from,to}` of one class.
    pub fn shifted(&self, topo: &Topology, job: usize, from: usize, to: usize) -> f64 {
        if topo.jobs()[job].origin != from || from == to {
            return 0.0;
        }
        topo.var_index(to, job)
            .map_or(0.0, |k| topo.vars()[k].rate * self.values[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ViolationKind {
    Negative { idc: usize, job: usize },
    Capacity { idc: usize },
    Bandwidth { from: usize, to: usize },
    ServiceCap { job: usize },
}

/// A constraint broken by `excess` constraint units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub excess: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ViolationKind::Negative { idc, job } => {
                write!(f, "S[{idc},{job}] negative by {:.3e}", self.excess)
            }
            ViolationKind::Capacity { idc } => {
                write!(f, "IDC {idc} capacity exceeded by {:.3e}", self.excess)
            }
            ViolationKind::Bandwidth { from, to } => {
                write!(f, "link {from}->{to} bandwidth exceeded by {:.3e}", self.excess)
            }
            ViolationKind::ServiceCap { job } => {
                write!(f, "job {job} served beyond its cap by {:.3e}", self.excess)
            }
        }
    }
}
