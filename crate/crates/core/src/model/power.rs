use serde::{Deserialize, Serialize};

use super::ModelError;

/// Server power as a function of normalized speed: `rho * s^nu + 1 - rho`.
///
/// `1 - rho` is the idle draw of an active server; a fully loaded server
/// draws exactly one power unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub rho: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
}

fn default_nu() -> f64 {
    2.0
}

impl Default for PowerModel {
    fn default() -> Self {
        Self { rho: 0.5, nu: 2.0 }
    }
}

impl PowerModel {
    pub fn new(rho: f64, nu: f64) -> Result<Self, ModelError> {
        let m = Self { rho, nu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(ModelError::Invalid(format!(
                "power model: rho = {} not in (0, 1]",
                self.rho
            )));
        }
        if !(self.nu.is_finite() && self.nu >= 1.0) {
            return Err(ModelError::Invalid(format!(
                "power model: nu = {} must be >= 1",
                self.nu
            )));
        }
        Ok(())
    }

    pub fn idle(&self) -> f64 {
        1.0 - self.rho
    }

    pub fn server_power(&self, speed: f64) -> Result<f64, ModelError> {
        if !(0.0..=1.0).contains(&speed) {
            return Err(ModelError::SpeedOutOfRange(speed));
        }
        Ok(self.rho * speed.powf(self.nu) + 1.0 - self.rho)
    }

    /// Power of a datacenter whose `active_servers` evenly share
    /// `total_demand` capacity units. For `nu = 2` this is
    /// `(1 - rho) K + rho S^2 / K`.
    pub fn idc_power(&self, active_servers: f64, total_demand: f64) -> Result<f64, ModelError> {
        let k = super::nonneg("active servers", active_servers)?;
        let s = super::nonneg("capacity demand", total_demand)?;
        if s > k * (1.0 + 1e-12) + 1e-9 {
            return Err(ModelError::DemandExceedsCapacity {
                demand: s,
                capacity: k,
            });
        }
        if k == 0.0 {
            return Ok(0.0);
        }
        let speed = (s / k).min(1.0);
        if self.nu == 2.0 {
            Ok(self.idle() * k + self.rho * s * s / k)
        } else {
            Ok(k * (self.rho * speed.powf(self.nu) + self.idle()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn server_power_examples() {
        let m = PowerModel::new(0.5, 2.0).unwrap();
        assert_eq!(m.server_power(0.0).unwrap(), 0.5);
        assert_eq!(m.server_power(0.5).unwrap(), 0.625);
        for (rho, nu) in [(0.3, 1.0), (0.9, 3.5), (1.0, 2.0)] {
            let m = PowerModel::new(rho, nu).unwrap();
            assert!((m.server_power(1.0).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn server_power_rejects_bad_speed() {
        let m = PowerModel::default();
        assert_eq!(m.server_power(1.5), Err(ModelError::SpeedOutOfRange(1.5)));
        assert!(m.server_power(-0.1).is_err());
        assert!(m.server_power(f64::NAN).is_err());
    }

    #[test]
    fn idc_power_examples() {
        let m = PowerModel::default();
        assert_eq!(m.idc_power(10.0, 0.0).unwrap(), 5.0);
        assert_eq!(m.idc_power(10.0, 10.0).unwrap(), 10.0);
        assert_eq!(m.idc_power(4.0, 2.0).unwrap(), 2.5);
        assert_eq!(m.idc_power(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn idc_power_matches_even_sharing_for_general_nu() {
        let m = PowerModel::new(0.4, 3.0).unwrap();
        let k = 8.0;
        let s = 3.0;
        let per_server = m.server_power(s / k).unwrap();
        assert!((m.idc_power(k, s).unwrap() - k * per_server).abs() < 1e-12);
    }

    #[test]
    fn idc_power_rejects_overload() {
        let m = PowerModel::default();
        assert!(matches!(
            m.idc_power(4.0, 5.0),
            Err(ModelError::DemandExceedsCapacity { .. })
        ));
        assert!(m.idc_power(0.0, 1.0).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(PowerModel::new(0.0, 2.0).is_err());
        assert!(PowerModel::new(1.2, 2.0).is_err());
        assert!(PowerModel::new(0.5, 0.5).is_err());
    }
}
