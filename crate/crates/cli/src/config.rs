use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trough::traces::{SyntheticConfig, TraceConfig};

/// One experiment: a scenario, the controllers to run on it and optional
/// sweep axes whose cartesian product gives the sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub controllers: Vec<ControllerSpec>,
    /// Overrides the scenario's horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Overrides the scenario's seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
    #[serde(default = "default_stability_threshold")]
    pub stability_threshold: f64,
    /// Slack for the QTF bounds; 5% of the smallest mean rate by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_epsilon: Option<f64>,
}

fn default_stability_threshold() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    Synthetic(SyntheticConfig),
    Trace(TraceSpec),
}

/// Trace scenario inputs. Relative paths resolve against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub packets: PathBuf,
    pub prices: PathBuf,
    #[serde(default)]
    pub config: TraceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControllerSpec {
    Qtf {
        v: f64,
    },
    Sstf {
        beta0: f64,
        #[serde(default)]
        lambda: LambdaSpec,
    },
    Bes,
    Ossi,
}

impl ControllerSpec {
    pub fn validate(&self, n_jobs: Option<usize>) -> Result<()> {
        match self {
            Self::Qtf { v } if !(v.is_finite() && *v > 0.0) => bail!("qtf: v = {v} must be > 0"),
            Self::Sstf { beta0, .. } if !(beta0.is_finite() && *beta0 > 0.0) => {
                bail!("sstf: beta0 = {beta0} must be > 0")
            }
            Self::Sstf {
                lambda: LambdaSpec::Values(l),
                ..
            } => {
                if let Some(m) = n_jobs.filter(|&m| m != l.len()) {
                    bail!("sstf: lambda lists {} rates for {m} job classes", l.len());
                }
                if l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    bail!("sstf: lambda entries must be finite and >= 0");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Rates the stochastic-subgradient controller targets: the scenario's
/// mean rates (exact for generated arrivals, the empirical means of a
/// trace), or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum LambdaSpec {
    #[default]
    #[serde(with = "scenario_tag")]
    Scenario,
    Values(Vec<f64>),
}

mod scenario_tag {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("scenario")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "scenario" {
            Ok(())
        } else {
            Err(de::Error::custom(format!("expected \"scenario\" or a list of rates, got {s:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Cost weight of every QTF controller.
    V,
    /// Step scale of every SSTF controller.
    Beta0,
    /// Delay-tolerant to delay-sensitive load ratio (synthetic scenarios).
    LoadRatio,
    /// Packet size threshold in Mbit (trace scenarios).
    Threshold,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::V => "v",
            Self::Beta0 => "beta0",
            Self::LoadRatio => "load_ratio",
            Self::Threshold => "threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// One combination of sweep values, in axis order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepPoint(pub Vec<(SweepParam, f64)>);

impl SweepPoint {
    pub fn get(&self, p: SweepParam) -> Option<f64> {
        self.0.iter().find(|(q, _)| *q == p).map(|&(_, v)| v)
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        self.0.iter().map(|&(p, v)| (p.name().to_string(), v)).collect()
    }
}

impl fmt::Display for SweepPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(p, v)| format!("{}={v}", p.name())).collect();
        f.write_str(&parts.join(","))
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Parses JSON, reporting the path of the offending key on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("at `{path}`: {}", e.into_inner())
        })
    }

    /// Reads, parses, resolves relative trace paths, applies the
    /// overrides and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let ScenarioSpec::Trace(t) = &mut cfg.scenario {
            for p in [&mut t.packets, &mut t.prices] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Folds the top-level seed and horizon into the scenario.
    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.horizon.is_some() {
            self.horizon = o.horizon;
        }
        if o.out.is_some() {
            self.out.clone_from(&o.out);
        }
        match &mut self.scenario {
            ScenarioSpec::Synthetic(s) => {
                if let Some(seed) = self.seed {
                    s.seed = seed;
                }
                if let Some(h) = self.horizon {
                    s.horizon = h;
                }
            }
            ScenarioSpec::Trace(t) => {
                if let Some(seed) = self.seed {
                    t.config.seed = seed;
                }
                if let Some(h) = self.horizon {
                    t.config.horizon = Some(h);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.controllers.is_empty() {
            bail!("at `controllers`: at least one controller is required");
        }
        let (n_jobs, synthetic) = match &self.scenario {
            ScenarioSpec::Synthetic(s) => {
                s.validate().context("at `scenario.synthetic`")?;
                (Some(s.n_jobs), true)
            }
            ScenarioSpec::Trace(t) => {
                t.config.validate().context("at `scenario.trace.config`")?;
                (Some(t.config.n_jobs), false)
            }
        };
        for (k, c) in self.controllers.iter().enumerate() {
            c.validate(n_jobs).with_context(|| format!("at `controllers[{k}]`"))?;
            if matches!(c, ControllerSpec::Ossi) && !synthetic {
                bail!("at `controllers[{k}]`: ossi needs an ergodic (synthetic) scenario");
            }
        }
        if self.horizon == Some(0) {
            bail!("at `horizon`: must be >= 1");
        }
        if !(self.stability_threshold.is_finite() && self.stability_threshold >= 0.0) {
            bail!("at `stability_threshold`: must be >= 0");
        }
        if let Some(e) = self.bound_epsilon {
            if !(e.is_finite() && e > 0.0) {
                bail!("at `bound_epsilon`: must be > 0");
            }
        }
        let mut seen = Vec::new();
        for (k, axis) in self.sweep.iter().enumerate() {
            let at = format!("at `sweep[{k}]`");
            if seen.contains(&axis.param) {
                bail!("{at}: {} is swept twice", axis.param.name());
            }
            seen.push(axis.param);
            if axis.values.is_empty() {
                bail!("{at}: no values");
            }
            let applies = match axis.param {
                SweepParam::V => self.controllers.iter().any(|c| matches!(c, ControllerSpec::Qtf { .. })),
                SweepParam::Beta0 => self.controllers.iter().any(|c| matches!(c, ControllerSpec::Sstf { .. })),
                SweepParam::LoadRatio => synthetic,
                SweepParam::Threshold => !synthetic,
            };
            if !applies {
                bail!("{at}: {} does not apply to this scenario and controller set", axis.param.name());
            }
            for &v in &axis.values {
                let ok = v.is_finite()
                    && match axis.param {
                        SweepParam::LoadRatio => v >= 0.0,
                        _ => v > 0.0,
                    };
                if !ok {
                    bail!("{at}: value {v} out of range for {}", axis.param.name());
                }
            }
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes; one empty point without axes.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let mut points = vec![SweepPoint::default()];
        for axis in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.0.push((axis.param, v));
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// The scenario with the scenario-shaping sweep values applied.
    pub fn scenario_at(&self, point: &SweepPoint) -> ScenarioSpec {
        let mut s = self.scenario.clone();
        match &mut s {
            ScenarioSpec::Synthetic(c) => {
                if let Some(r) = point.get(SweepParam::LoadRatio) {
                    c.load_ratio = r;
                }
            }
            ScenarioSpec::Trace(t) => {
                if let Some(th) = point.get(SweepParam::Threshold) {
                    t.config.packet.size_threshold_mb = th;
                }
            }
        }
        s
    }

    /// The controller with the controller sweep values applied.
    pub fn controller_at(&self, k: usize, point: &SweepPoint) -> ControllerSpec {
        let mut c = self.controllers[k].clone();
        match &mut c {
            ControllerSpec::Qtf { v } => {
                if let Some(x) = point.get(SweepParam::V) {
                    *v = x;
                }
            }
            ControllerSpec::Sstf { beta0, .. } => {
                if let Some(x) = point.get(SweepParam::Beta0) {
                    *beta0 = x;
                }
            }
            ControllerSpec::Bes | ControllerSpec::Ossi => {}
        }
        c
    }

    /// Pretty JSON of the effective config; parses back to an equal value.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON of the effective config, excluding the
    /// output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "scenario": {"synthetic": {"horizon": 50}},
        "controllers": [{"policy": "qtf", "v": 1.0}]
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.stability_threshold, 0.01);
        let ScenarioSpec::Synthetic(s) = &c.scenario else { panic!() };
        assert_eq!(s.n_idcs, 5);
        assert_eq!(c.sweep_points().len(), 1);
    }

    #[test]
    fn round_trips_through_json() {
        let text = r#"{
            "scenario": {"trace": {"packets": "p.csv", "prices": "q.csv", "config": {"packet": {"size_threshold_mb": 100}}}},
            "controllers": [{"policy": "bes"}, {"policy": "sstf", "beta0": 0.001},
                            {"policy": "sstf", "beta0": 1, "lambda": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]},
                            {"policy": "qtf", "v": 1000}],
            "seed": 9, "horizon": 100,
            "sweep": [{"param": "threshold", "values": [10, 50]}, {"param": "v", "values": [1, 1000]}]
        }"#;
        let c = RunConfig::from_json(text).unwrap();
        c.validate().unwrap();
        let again = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
        let ControllerSpec::Sstf { lambda, .. } = &c.controllers[1] else { panic!() };
        assert_eq!(lambda, &LambdaSpec::Scenario);

        let synth = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(RunConfig::from_json(&synth.to_json()).unwrap(), synth);
    }

    #[test]
    fn errors_point_at_the_offending_key() {
        let bad = r#"{"scenario": {"synthetic": {"capacity": "big"}}, "controllers": []}"#;
        let e = RunConfig::from_json(bad).unwrap_err().to_string();
        assert!(e.contains("scenario.synthetic.capacity"), "{e}");

        let unknown = r#"{"scenario": {"synthetic": {}}, "controllers": [{"policy": "qtf", "v": 1, "w": 2}]}"#;
        let e = RunConfig::from_json(unknown).unwrap_err().to_string();
        assert!(e.contains("controllers"), "{e}");

        let empty = RunConfig::from_json(r#"{"scenario": {"synthetic": {}}, "controllers": []}"#).unwrap();
        assert!(format!("{:#}", empty.validate().unwrap_err()).contains("controllers"));

        let bad_v = RunConfig::from_json(r#"{"scenario": {"synthetic": {}}, "controllers": [{"policy": "qtf", "v": -1}]}"#).unwrap();
        assert!(format!("{:#}", bad_v.validate().unwrap_err()).contains("controllers[0]"));
    }

    #[test]
    fn sweep_axes_must_apply() {
        let c = RunConfig::from_json(
            r#"{"scenario": {"synthetic": {}}, "controllers": [{"policy": "bes"}],
                "sweep": [{"param": "v", "values": [1]}]}"#,
        )
        .unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_json(
            r#"{"scenario": {"synthetic": {}}, "controllers": [{"policy": "qtf", "v": 1}],
                "sweep": [{"param": "threshold", "values": [10]}]}"#,
        )
        .unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_json(
            r#"{"scenario": {"synthetic": {}}, "controllers": [{"policy": "ossi"}],
                "sweep": [{"param": "nope", "values": [1]}]}"#,
        );
        assert!(c.is_err());
    }

    #[test]
    fn sweep_points_form_a_product() {
        let c = RunConfig::from_json(
            r#"{"scenario": {"synthetic": {}}, "controllers": [{"policy": "qtf", "v": 1}],
                "sweep": [{"param": "load_ratio", "values": [0.5, 1]}, {"param": "v", "values": [1, 10, 100]}]}"#,
        )
        .unwrap();
        c.validate().unwrap();
        let pts = c.sweep_points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[4].to_string(), "load_ratio=1,v=10");
        assert_eq!(c.controller_at(0, &pts[4]), ControllerSpec::Qtf { v: 10.0 });
        let ScenarioSpec::Synthetic(s) = c.scenario_at(&pts[0]) else { panic!() };
        assert_eq!(s.load_ratio, 0.5);
    }

    #[test]
    fn overrides_reach_the_scenario() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.apply(&Overrides {
            seed: Some(77),
            horizon: Some(10),
            out: None,
        });
        let ScenarioSpec::Synthetic(s) = &c.scenario else { panic!() };
        assert_eq!((s.seed, s.horizon), (77, 10));
        let before = RunConfig::from_json(MINIMAL).unwrap();
        assert_ne!(before.hash(), c.hash());
    }

    #[test]
    fn sstf_lambda_accepts_scenario_or_values() {
        let parse = |l: &str| {
            RunConfig::from_json(&format!(
                r#"{{"scenario": {{"synthetic": {{}}}}, "controllers": [{{"policy": "sstf", "beta0": 1{l}}}]}}"#
            ))
        };
        let implicit = parse("").unwrap();
        assert_eq!(parse(r#", "lambda": "scenario""#).unwrap(), implicit);
        assert!(implicit.to_json().contains(r#""lambda": "scenario""#));
        assert!(parse(r#", "lambda": "mean""#).is_err());
        let ControllerSpec::Sstf { lambda, .. } = &parse(r#", "lambda": [1, 2]"#).unwrap().controllers[0] else {
            panic!()
        };
        assert_eq!(lambda, &LambdaSpec::Values(vec![1.0, 2.0]));
    }
}
