//! Scenario configuration: one JSON document describing everything a batch
//! needs. See `docs/scenario.schema.json` for the schema.

use crate::error::{Error, Result};
use crate::grading::QualitySpec;
use crate::sensor::SensorConfig;
use crate::thermal::OperatingConfiguration;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// Where the target goes in the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PlacementPolicy {
    /// Fixed top-left anchor for the target chip.
    Fixed { x: i64, y: i64 },
    /// Uniform-random anchor keeping the target (and occluder) at least
    /// `margin_px` away from the frame edge.
    UniformRandom {
        #[serde(default)]
        margin_px: u32,
    },
}

impl Default for PlacementPolicy {
    fn default() -> Self {
        PlacementPolicy::UniformRandom { margin_px: 0 }
    }
}

/// Optional parameters for signature-database expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandConfig {
    /// Operating-configuration names to expand (built-in or custom).
    pub configurations: Vec<String>,
    /// Variants per (signature, configuration) pair.
    pub variants: u32,
}

/// One scenario: inputs, requested quality, sensor, and generation policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Background image (16-bit PNG or PGM, with optional .meta sidecar).
    pub background: PathBuf,
    /// Signature database directory.
    pub signatures: PathBuf,
    /// Occluder directory; required when `quality.rx_star > 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occluder: Option<PathBuf>,
    /// Restrict scenes to one vehicle; default: draw among all vehicles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle_id: Option<String>,
    /// Fix the view azimuth (nearest databased view is used); default: draw
    /// a view uniformly per scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect_azimuth_deg: Option<f64>,
    /// Name of the operating configuration (built-in or from
    /// `custom_configurations`).
    pub operating_configuration: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub custom_configurations: Vec<OperatingConfiguration>,
    pub quality: QualitySpec,
    #[serde(default)]
    pub sensor: SensorConfig,
    /// Width of the local-background ring F1 around the target.
    #[serde(default = "default_ring_width")]
    pub ring_width_px: u32,
    #[serde(default)]
    pub placement: PlacementPolicy,
    /// Tolerance on the achieved occlusion ratio.
    #[serde(default = "default_occlusion_epsilon")]
    pub occlusion_epsilon: f64,
    /// Number of scenes in a batch.
    #[serde(default = "default_count")]
    pub count: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Database-expansion parameters for `expand-db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expand: Option<ExpandConfig>,
}

fn default_ring_width() -> u32 {
    5
}

fn default_occlusion_epsilon() -> f64 {
    0.01
}

fn default_count() -> u64 {
    1
}

impl ScenarioConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::ConfigError(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| Error::ConfigError(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.quality.validate()?;
        self.sensor
            .validate()
            .map_err(|e| Error::ConfigError(format!("sensor: {e}")))?;
        if self.count == 0 {
            return Err(Error::ConfigError("count must be at least 1".into()));
        }
        if self.ring_width_px == 0 {
            return Err(Error::ConfigError("ring_width_px must be at least 1".into()));
        }
        if !(self.occlusion_epsilon.is_finite() && self.occlusion_epsilon > 0.0) {
            return Err(Error::ConfigError(
                "occlusion_epsilon must be positive".into(),
            ));
        }
        if self.quality.rx_star > 0.0 && self.occluder.is_none() {
            return Err(Error::ConfigError(
                "rx_star > 0 requires an occluder directory".into(),
            ));
        }
        self.resolve_operating_configuration()?;
        Ok(())
    }

    /// Resolve the named operating configuration: custom entries shadow the
    /// built-ins.
    pub fn resolve_operating_configuration(&self) -> Result<OperatingConfiguration> {
        self.resolve_named_configuration(&self.operating_configuration)
    }

    pub fn resolve_named_configuration(&self, name: &str) -> Result<OperatingConfiguration> {
        if let Some(c) = self.custom_configurations.iter().find(|c| c.name == name) {
            return Ok(c.clone());
        }
        OperatingConfiguration::builtin(name).ok_or_else(|| {
            Error::ConfigError(format!(
                "unknown operating configuration '{name}' (built-ins: {})",
                OperatingConfiguration::builtin_names().join(", ")
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Calibration;

    fn minimal() -> ScenarioConfig {
        ScenarioConfig {
            background: "bg.png".into(),
            signatures: "sigs".into(),
            occluder: None,
            vehicle_id: None,
            aspect_azimuth_deg: None,
            operating_configuration: "stationary_engine_running".into(),
            custom_configurations: vec![],
            quality: QualitySpec {
                rss_star: 2.0,
                rsc_star: 1.5,
                k_star: 0.3,
                qd_star: None,
                rx_star: 0.0,
                calibration: Calibration::new(1.0).unwrap(),
                tolerance: 1e-9,
            },
            sensor: SensorConfig::default(),
            ring_width_px: 5,
            placement: PlacementPolicy::default(),
            occlusion_epsilon: 0.01,
            count: 1,
            master_seed: 0,
            expand: None,
        }
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let cfg = minimal();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);

        // defaults fill in when omitted
        let sparse = r#"{
            "background": "bg.png",
            "signatures": "sigs",
            "operating_configuration": "cold",
            "quality": {"rss_star_K": 2.0, "rsc_star": 1.5, "k_star": 0.0, "gl_per_kelvin": 1.0}
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(sparse).unwrap();
        assert_eq!(cfg.ring_width_px, 5);
        assert_eq!(cfg.count, 1);
        assert_eq!(cfg.occlusion_epsilon, 0.01);
        assert_eq!(cfg.quality.tolerance, 1e-9);
        assert!(cfg.sensor.is_identity());
        cfg.validate().unwrap();
    }

    #[test]
    fn occluder_required_for_occlusion() {
        let mut cfg = minimal();
        cfg.quality.rx_star = 0.5;
        assert!(matches!(cfg.validate(), Err(Error::ConfigError(_))));
    }

    #[test]
    fn unknown_configuration_rejected() {
        let mut cfg = minimal();
        cfg.operating_configuration = "afterburner".into();
        assert!(matches!(cfg.validate(), Err(Error::ConfigError(_))));
    }

    #[test]
    fn custom_configuration_shadows_builtin() {
        use crate::thermal::{RegionModes, ThermalMode};
        let mut cfg = minimal();
        cfg.custom_configurations.push(OperatingConfiguration {
            name: "cold".into(),
            modes: RegionModes::uniform(ThermalMode::Operating),
        });
        cfg.operating_configuration = "cold".into();
        let resolved = cfg.resolve_operating_configuration().unwrap();
        assert_eq!(resolved.modes.engine, ThermalMode::Operating);
    }
}
