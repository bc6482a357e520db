use serde::{Deserialize, Serialize};

use super::terrain::{SoilParams, TerrainConfig, TerrainModel};
use super::tracking::TrackingConfig;
use super::SimError;
use crate::control::ControlConfig;
use crate::kinematics::RoverGeometry;
use crate::manager::{ManagerConfig, SafetyLimits};

/// Largest payload the rover carries per excavation cycle.
pub const MAX_PAYLOAD_KG: f64 = 300.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    pub physics_hz: u32,
    pub control_hz: u32,
    pub telemetry_hz: u32,
    pub tracking_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            physics_hz: 1000,
            control_hz: 100,
            telemetry_hz: 20,
            tracking_hz: 60,
        }
    }
}

impl Rates {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.physics_hz > 0
            && [self.control_hz, self.telemetry_hz].iter().all(|r| *r > 0 && self.physics_hz.is_multiple_of(*r))
            && self.tracking_hz > 0
            && self.tracking_hz <= self.physics_hz;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(
                "control and telemetry rates must divide physics_hz; tracking_hz must not exceed it".into(),
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StartPose {
    pub x_m: f64,
    pub y_m: f64,
    pub yaw_deg: f64,
}

/// Named pseudo-random generator for every stochastic path in a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    #[default]
    Chacha8,
}

/// Everything needed to build a simulated world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub description: String,
    pub terrain: TerrainConfig,
    pub soil: SoilParams,
    pub rover: RoverGeometry<f64>,
    pub control: ControlConfig<f64>,
    pub manager: ManagerConfig<f64>,
    pub safety: SafetyLimits<f64>,
    pub tracking: TrackingConfig,
    pub rates: Rates,
    pub start: StartPose,
    pub payload_kg: f64,
    pub blade_drag_n: f64,
    pub generator: Generator,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            description: String::new(),
            terrain: TerrainConfig::default(),
            soil: SoilParams::default(),
            rover: RoverGeometry::default(),
            control: ControlConfig::default(),
            manager: ManagerConfig::default(),
            safety: SafetyLimits::default(),
            tracking: TrackingConfig::default(),
            rates: Rates::default(),
            start: StartPose { x_m: 2.0, y_m: 2.75, yaw_deg: 0.0 },
            payload_kg: 0.0,
            blade_drag_n: 0.0,
            generator: Generator::Chacha8,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.rover.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        self.soil.validate()?;
        self.safety.validate().map_err(SimError::InvalidConfig)?;
        self.rates.validate()?;
        TerrainModel::new(&self.terrain)?;
        if !(0.0..=MAX_PAYLOAD_KG).contains(&self.payload_kg) {
            return Err(SimError::InvalidConfig(format!("payload_kg must be within 0..={MAX_PAYLOAD_KG}")));
        }
        if !(self.blade_drag_n >= 0.0 && self.blade_drag_n.is_finite()) {
            return Err(SimError::InvalidConfig("blade_drag_n must be non-negative".into()));
        }
        if !(self.tracking.sigma_position_m >= 0.0 && self.tracking.sigma_angle_deg >= 0.0) {
            return Err(SimError::InvalidConfig("tracking sigmas must be non-negative".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        Scenario::default().validate().unwrap();
    }

    #[test]
    fn toml_overrides_and_rejects_unknown() {
        let s = Scenario::from_toml(
            r#"
            description = "tilted"
            payload_kg = 300.0
            [terrain.tilt_bed]
            hinge_x_m = 6.5
            angle_deg = 25.0
            [soil]
            friction_angle_deg = 30.0
            "#,
        )
        .unwrap();
        assert_eq!(s.terrain.tilt_bed.unwrap().angle_deg, 25.0);
        assert_eq!(s.soil.friction_angle_deg, 30.0);
        assert_eq!(s.soil.cohesion_kpa, 10.0);
        assert!(Scenario::from_toml("payload_kgs = 1.0").is_err());
        assert!(Scenario::from_toml("payload_kg = 301.0").is_err());
        assert!(Scenario::from_toml("[terrain.tilt_bed]\nhinge_x_m = 6.5\nangle_deg = 35.0").is_err());
    }
}
