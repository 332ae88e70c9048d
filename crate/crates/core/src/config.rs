//! JSON instrument configuration.
//!
//! Keys carry their unit as a suffix. Unknown keys are rejected at every
//! level. Parsing and validation are separate steps so callers can tell a
//! malformed file from physically invalid values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{DispersionSpec, SpectralSpec};
use crate::model::{DetectionSpec, GyroGeometry, OpticalPath, SourceSpec, WindowMode};
use crate::sagnac::RotationRate;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Validate(#[from] crate::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub fiber_length_m: f64,
    pub coil_radius_m: f64,
    pub wavelength_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub noon_order: u32,
    /// N00N pairs per second reaching the detectors.
    pub pair_rate_hz: f64,
    pub initial_noon_fraction: f64,
    #[serde(default)]
    pub dark_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    #[serde(default)]
    pub fiber_loss_db_per_km: f64,
    #[serde(default)]
    pub lumped_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub jitter_s: f64,
    pub measurement_time_s: f64,
    #[serde(default)]
    pub window_mode: WindowMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub center_wavelength_m: f64,
    pub linewidth_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    #[serde(default = "default_chromatic")]
    pub chromatic_coeff_ps_per_km_nm: f64,
    #[serde(default = "default_pmd")]
    pub pmd_coeff_ps_per_sqrt_km: f64,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self {
            chromatic_coeff_ps_per_km_nm: default_chromatic(),
            pmd_coeff_ps_per_sqrt_km: default_pmd(),
        }
    }
}

fn default_chromatic() -> f64 {
    DispersionSpec::DEFAULT_CHROMATIC_PS_PER_KM_NM
}

fn default_pmd() -> f64 {
    DispersionSpec::DEFAULT_PMD_PS_PER_SQRT_KM
}

/// Pump wavelength drift with crystal temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    #[serde(default = "default_drift")]
    pub drift_nm_per_degc: f64,
    #[serde(default = "default_stability")]
    pub stability_degc: f64,
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self {
            drift_nm_per_degc: default_drift(),
            stability_degc: default_stability(),
        }
    }
}

fn default_drift() -> f64 {
    0.2
}

fn default_stability() -> f64 {
    0.01
}

fn default_coherence() -> f64 {
    1.0
}

/// Complete instrument description as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentConfig {
    pub geometry: GeometryConfig,
    pub source: SourceConfig,
    pub path: PathConfig,
    pub detection: DetectionConfig,
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub dispersion: DispersionConfig,
    #[serde(default)]
    pub pump: PumpConfig,
    /// Measured fringe visibility, multiplied with computed dispersion factors.
    #[serde(default = "default_coherence")]
    pub base_coherence: f64,
    /// Reciprocal arrival-time difference between the two paths.
    #[serde(default)]
    pub reciprocal_delay_s: f64,
    #[serde(default)]
    pub bias_phase_rad: f64,
    #[serde(default)]
    pub rotation_rad_per_s: f64,
}

/// Validated instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    pub geometry: GyroGeometry,
    pub source: SourceSpec,
    pub path: OpticalPath,
    pub detection: DetectionSpec,
    pub spectrum: SpectralSpec,
    pub dispersion: DispersionSpec,
    pub pump: PumpConfig,
    pub base_coherence: f64,
    pub reciprocal_delay_s: f64,
    pub bias_phase_rad: f64,
    pub rotation: RotationRate,
}

impl InstrumentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<Instrument, ConfigError> {
        use crate::error::{invalid, require_finite, require_non_negative};

        let g = &self.geometry;
        let s = &self.source;
        let d = &self.detection;
        if !(self.base_coherence > 0.0 && self.base_coherence <= 1.0) {
            return Err(invalid(
                "base_coherence",
                format!("must lie in (0, 1], got {}", self.base_coherence),
            )
            .into());
        }
        require_non_negative("drift_nm_per_degc", self.pump.drift_nm_per_degc)?;
        require_non_negative("stability_degc", self.pump.stability_degc)?;
        require_finite("reciprocal_delay_s", self.reciprocal_delay_s)?;
        require_finite("bias_phase_rad", self.bias_phase_rad)?;
        Ok(Instrument {
            geometry: GyroGeometry::new(g.fiber_length_m, g.coil_radius_m, g.wavelength_m)?,
            source: SourceSpec::new(s.noon_order, s.pair_rate_hz, s.initial_noon_fraction, s.dark_rate_hz)?,
            path: OpticalPath::new(self.path.fiber_loss_db_per_km, self.path.lumped_loss_db)?,
            detection: DetectionSpec::new(d.jitter_s, d.measurement_time_s, d.window_mode)?,
            spectrum: SpectralSpec::new(self.spectrum.center_wavelength_m, self.spectrum.linewidth_m)?,
            dispersion: DispersionSpec::new(
                self.dispersion.chromatic_coeff_ps_per_km_nm,
                self.dispersion.pmd_coeff_ps_per_sqrt_km,
            )?,
            pump: self.pump.clone(),
            base_coherence: self.base_coherence,
            reciprocal_delay_s: self.reciprocal_delay_s,
            bias_phase_rad: self.bias_phase_rad,
            rotation: RotationRate::new(self.rotation_rad_per_s)?,
        })
    }
}

/// Read and validate a config file.
pub fn load(path: &Path) -> Result<Instrument, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    InstrumentConfig::from_json(&text)?.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "geometry": {"fiber_length_m": 1000, "coil_radius_m": 0.4, "wavelength_m": 1.55e-6},
        "source": {"noon_order": 2, "pair_rate_hz": 4000, "initial_noon_fraction": 0.95},
        "path": {"lumped_loss_db": 10},
        "detection": {"jitter_s": 1.56e-10, "measurement_time_s": 1800},
        "spectrum": {"center_wavelength_m": 1.55e-6, "linewidth_m": 1e-9}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = InstrumentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.base_coherence, 1.0);
        assert_eq!(cfg.detection.window_mode, WindowMode::Binned);
        assert_eq!(cfg.dispersion, DispersionConfig::default());
        let inst = cfg.validate().unwrap();
        assert_eq!(inst.source.noon_order(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replacen("\"geometry\"", "\"colour\": 1, \"geometry\"", 1);
        let err = InstrumentConfig::from_json(&bad).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(err.to_string().contains("colour"));
        let nested = MINIMAL.replace("\"noon_order\": 2", "\"noon_order\": 2, \"photons\": 3");
        assert!(matches!(InstrumentConfig::from_json(&nested), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn validation_names_the_field() {
        let bad = MINIMAL.replace("\"coil_radius_m\": 0.4", "\"coil_radius_m\": -0.4");
        let err = InstrumentConfig::from_json(&bad).unwrap().validate().unwrap_err();
        assert!(matches!(err, ConfigError::Validate(_)));
        assert!(err.to_string().contains("coil_radius_m"), "{err}");
    }

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = InstrumentConfig::from_json(MINIMAL).unwrap();
        let again = InstrumentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_json(), again.to_json());
    }
}
