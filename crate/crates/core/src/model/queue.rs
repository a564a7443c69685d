use serde::{Deserialize, Serialize};

use super::ModelError;

/// Backlog of each delay-tolerant class, in traffic units.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueueVector(pub Vec<f64>);

impl QueueVector {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One slot of `Q' = max(Q - service, 0) + arrivals`. Arrivals of the slot
/// are not available to its own service.
pub fn queue_step(
    q: &QueueVector,
    service: &[f64],
    arrivals: &[f64],
) -> Result<QueueVector, ModelError> {
    let m = q.len();
    for (what, len) in [("service", service.len()), ("arrivals", arrivals.len())] {
        if len != m {
            return Err(ModelError::Dimension { what, expected: m, got: len });
        }
    }
    q.0.iter()
        .zip(service)
        .zip(arrivals)
        .map(|((&qj, &sj), &aj)| {
            super::nonneg("backlog", qj)?;
            super::nonneg("service", sj)?;
            super::nonneg("arrivals", aj)?;
            Ok((qj - sj).max(0.0) + aj)
        })
        .collect::<Result<Vec<_>, _>>()
        .map(QueueVector)
}
