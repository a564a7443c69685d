use serde::{Deserialize, Serialize};

use super::ModelError;

/// One affine piece `slope * u + intercept` of a link cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub slope: f64,
    pub intercept: f64,
}

/// Convex piecewise-linear cost of the fraction `u` of a link's residual
/// bandwidth occupied by shifted delay-tolerant traffic, evaluated as the
/// pointwise maximum of its segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShiftCostRepr", into = "ShiftCostRepr")]
pub struct ShiftCostModel {
    segments: Vec<Segment>,
}

/// Serialized form: either explicit segments or slopes with breakpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ShiftCostRepr {
    Segments {
        segments: Vec<Segment>,
    },
    Breakpoints {
        slopes: Vec<f64>,
        breakpoints: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
}

impl TryFrom<ShiftCostRepr> for ShiftCostModel {
    type Error = ModelError;

    fn try_from(r: ShiftCostRepr) -> Result<Self, Self::Error> {
        match r {
            ShiftCostRepr::Segments { segments } => Self::new(segments),
            ShiftCostRepr::Breakpoints {
                slopes,
                breakpoints,
                intercept,
            } => Self::from_breakpoints(&slopes, &breakpoints, intercept),
        }
    }
}

impl From<ShiftCostModel> for ShiftCostRepr {
    fn from(m: ShiftCostModel) -> Self {
        ShiftCostRepr::Segments {
            segments: m.segments,
        }
    }
}

impl Default for ShiftCostModel {
    /// Six pieces with slopes 1, 3, 10, 70, 500, 5000 meeting at
    /// utilizations 1/3, 2/3, 9/10, 1 and 11/10, zero at an idle link.
    fn default() -> Self {
        Self::from_breakpoints(
            &[1.0, 3.0, 10.0, 70.0, 500.0, 5000.0],
            &[1.0 / 3.0, 2.0 / 3.0, 0.9, 1.0, 1.1],
            0.0,
        )
        .expect("default link cost is well formed")
    }
}

impl ShiftCostModel {
    pub fn new(segments: Vec<Segment>) -> Result<Self, ModelError> {
        if segments.is_empty() {
            return Err(ModelError::Invalid("shift cost: no segments".into()));
        }
        for s in &segments {
            if !s.slope.is_finite() || !s.intercept.is_finite() || s.slope < 0.0 {
                return Err(ModelError::Invalid(format!(
                    "shift cost: bad segment {s:?}"
                )));
            }
        }
        if segments.windows(2).any(|w| w[1].slope < w[0].slope) {
            return Err(ModelError::Invalid(
                "shift cost: slopes must be nondecreasing".into(),
            ));
        }
        let b1 = segments[0].intercept;
        if segments.iter().any(|s| s.intercept > b1) {
            return Err(ModelError::Invalid(
                "shift cost: first segment must attain the maximum at zero utilization".into(),
            ));
        }
        Ok(Self { segments })
    }

    /// Builds a continuous cost from slopes and the utilizations where
    /// consecutive pieces meet. `intercept` is the cost at `u = 0`.
    pub fn from_breakpoints(
        slopes: &[f64],
        breakpoints: &[f64],
        intercept: f64,
    ) -> Result<Self, ModelError> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(ModelError::Dimension {
                what: "shift cost breakpoints",
                expected: slopes.len().saturating_sub(1),
                got: breakpoints.len(),
            });
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) || breakpoints.iter().any(|&x| x < 0.0) {
            return Err(ModelError::Invalid(
                "shift cost: breakpoints must be positive and increasing".into(),
            ));
        }
        let mut segments = Vec::with_capacity(slopes.len());
        let mut b = intercept;
        segments.push(Segment {
            slope: slopes[0],
            intercept: b,
        });
        for (k, &x) in breakpoints.iter().enumerate() {
            b += (slopes[k] - slopes[k + 1]) * x;
            segments.push(Segment {
                slope: slopes[k + 1],
                intercept: b,
            });
        }
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn zero_value(&self) -> f64 {
        self.segments[0].intercept
    }

    pub fn value(&self, utilization: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| s.slope * utilization + s.intercept)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Range of subgradients at `u`: the smallest and largest slope among
    /// segments within `tol` of the maximum.
    pub fn subgradient_range(&self, utilization: f64, tol: f64) -> (f64, f64) {
        let v = self.value(utilization);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.segments {
            if s.slope * utilization + s.intercept >= v - tol {
                lo = lo.min(s.slope);
                hi = hi.max(s.slope);
            }
        }
        (lo, hi)
    }

    /// Segments that attain the maximum somewhere on `[0, umax]`.
    pub fn active_segments(&self, umax: f64) -> Vec<Segment> {
        let mut probes = vec![0.0, umax];
        for w in self.segments.windows(2) {
            if w[1].slope > w[0].slope {
                let x = (w[0].intercept - w[1].intercept) / (w[1].slope - w[0].slope);
                if x > 0.0 && x < umax {
                    probes.push(x);
                }
            }
        }
        let tol = 1e-12 * (1.0 + self.value(umax).abs());
        self.segments
            .iter()
            .copied()
            .filter(|s| {
                probes
                    .iter()
                    .any(|&u| s.slope * u + s.intercept >= self.value(u) - tol)
            })
            .collect()
    }
}

/// Cost of a link carrying `utilization` of its bandwidth.
pub fn shift_cost(utilization: f64, model: &ShiftCostModel) -> f64 {
    model.value(utilization)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_examples() {
        let m = ShiftCostModel::default();
        assert_eq!(shift_cost(0.0, &m), 0.0);
        assert!((shift_cost(0.5, &m) - 5.0 / 6.0).abs() < 1e-12);
        assert!((shift_cost(1.0, &m) - 32.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn default_is_continuous_at_breakpoints() {
        let m = ShiftCostModel::default();
        let segs = m.segments();
        for (k, &x) in [1.0 / 3.0, 2.0 / 3.0, 0.9, 1.0, 1.1].iter().enumerate() {
            let left = segs[k].slope * x + segs[k].intercept;
            let right = segs[k + 1].slope * x + segs[k + 1].intercept;
            assert!((left - right).abs() < 1e-9, "break {x}");
        }
    }

    #[test]
    fn subgradient_at_kink() {
        let m = ShiftCostModel::default();
        assert_eq!(m.subgradient_range(0.5, 1e-12), (3.0, 3.0));
        let (lo, hi) = m.subgradient_range(2.0 / 3.0, 1e-9);
        assert_eq!((lo, hi), (3.0, 10.0));
    }

    #[test]
    fn active_segments_prune_tail() {
        let m = ShiftCostModel::default();
        // the 5000 piece only overtakes past u = 1.1
        assert_eq!(m.active_segments(1.0).len(), 5);
        assert_eq!(m.active_segments(2.0).len(), 6);
    }

    #[test]
    fn rejects_malformed() {
        assert!(ShiftCostModel::new(vec![]).is_err());
        assert!(ShiftCostModel::from_breakpoints(&[2.0, 1.0], &[0.5], 0.0).is_err());
        assert!(ShiftCostModel::from_breakpoints(&[1.0, 2.0], &[0.5, 0.6], 0.0).is_err());
        let bad = vec![
            Segment { slope: 1.0, intercept: 0.0 },
            Segment { slope: 2.0, intercept: 1.0 },
        ];
        assert!(ShiftCostModel::new(bad).is_err());
    }

    #[test]
    fn serde_accepts_breakpoint_form() {
        let m: ShiftCostModel =
            serde_json::from_str(r#"{"slopes":[1,3],"breakpoints":[0.5]}"#).unwrap();
        assert!((m.value(1.0) - 2.0).abs() < 1e-12);
        let back: ShiftCostModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn convex_and_monotone(a in 0.0f64..1.5, b in 0.0f64..1.5) {
            let m = ShiftCostModel::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.value(lo) <= m.value(hi) + 1e-12);
            let mid = m.value(0.5 * (a + b));
            prop_assert!(mid <= 0.5 * (m.value(a) + m.value(b)) + 1e-9);
        }
    }
}
