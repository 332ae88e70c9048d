//! Shared value types for the gyroscope noise model.
//!
//! Units are SI (meters, seconds, hertz, radians) except optical loss, which
//! is carried in dB/km and dB. Field accessors carry the unit in their name.
//! Photon populations are real numbers throughout; nothing here rounds to
//! integer counts.
//!
//! Every type validates its invariants at construction and is immutable
//! afterwards, so values can be freely shared between threads.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_finite, require_non_negative, require_positive, Result};

/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Earth's sidereal rotation rate, rad/s.
pub const EARTH_RATE_RAD_PER_S: f64 = 7.29e-5;

/// Physical constants used by the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysConstants {
    pub c_m_per_s: f64,
}

impl PhysConstants {
    pub const SI: PhysConstants = PhysConstants {
        c_m_per_s: SPEED_OF_LIGHT_M_PER_S,
    };
}

impl Default for PhysConstants {
    fn default() -> Self {
        Self::SI
    }
}

const MIN_WAVELENGTH_M: f64 = 100e-9;
const MAX_WAVELENGTH_M: f64 = 10e-6;

/// Fiber coil geometry and operating wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroGeometry {
    fiber_length_m: f64,
    coil_radius_m: f64,
    wavelength_m: f64,
}

impl GyroGeometry {
    pub fn new(fiber_length_m: f64, coil_radius_m: f64, wavelength_m: f64) -> Result<Self> {
        require_positive("fiber_length_m", fiber_length_m)?;
        require_positive("coil_radius_m", coil_radius_m)?;
        require_positive("wavelength_m", wavelength_m)?;
        if !(MIN_WAVELENGTH_M < wavelength_m && wavelength_m < MAX_WAVELENGTH_M) {
            return Err(invalid(
                "wavelength_m",
                format!("{wavelength_m} m is outside the ({MIN_WAVELENGTH_M}, {MAX_WAVELENGTH_M}) m band"),
            ));
        }
        Ok(Self {
            fiber_length_m,
            coil_radius_m,
            wavelength_m,
        })
    }

    pub fn fiber_length_m(&self) -> f64 {
        self.fiber_length_m
    }

    pub fn coil_radius_m(&self) -> f64 {
        self.coil_radius_m
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    /// Sagnac scale factor 4πLr/(λc): phase per unit angular velocity, in seconds.
    pub fn scale_factor_s(&self) -> f64 {
        4.0 * PI * self.fiber_length_m * self.coil_radius_m
            / (self.wavelength_m * PhysConstants::SI.c_m_per_s)
    }
}

/// Photon source description.
///
/// `pair_rate_hz` is the N00N-pair rate reaching the detectors, i.e. the
/// measured N00N flux; the single-photon flux accompanying it is derived from
/// `initial_noon_fraction` and the optical path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    noon_order: u32,
    pair_rate_hz: f64,
    initial_noon_fraction: f64,
    dark_rate_hz: f64,
}

impl SourceSpec {
    pub fn new(
        noon_order: u32,
        pair_rate_hz: f64,
        initial_noon_fraction: f64,
        dark_rate_hz: f64,
    ) -> Result<Self> {
        if noon_order < 2 {
            return Err(invalid(
                "noon_order",
                format!("N00N order must be >= 2, got {noon_order}"),
            ));
        }
        require_non_negative("pair_rate_hz", pair_rate_hz)?;
        if !(initial_noon_fraction > 0.0 && initial_noon_fraction <= 1.0) {
            return Err(invalid(
                "initial_noon_fraction",
                format!("must lie in (0, 1], got {initial_noon_fraction}"),
            ));
        }
        require_non_negative("dark_rate_hz", dark_rate_hz)?;
        Ok(Self {
            noon_order,
            pair_rate_hz,
            initial_noon_fraction,
            dark_rate_hz,
        })
    }

    pub fn noon_order(&self) -> u32 {
        self.noon_order
    }

    pub fn pair_rate_hz(&self) -> f64 {
        self.pair_rate_hz
    }

    pub fn initial_noon_fraction(&self) -> f64 {
        self.initial_noon_fraction
    }

    pub fn dark_rate_hz(&self) -> f64 {
        self.dark_rate_hz
    }
}

/// Fiber attenuation plus lumped element losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalPath {
    fiber_loss_db_per_km: f64,
    lumped_loss_db: f64,
}

impl OpticalPath {
    pub fn new(fiber_loss_db_per_km: f64, lumped_loss_db: f64) -> Result<Self> {
        require_non_negative("fiber_loss_db_per_km", fiber_loss_db_per_km)?;
        require_non_negative("lumped_loss_db", lumped_loss_db)?;
        Ok(Self {
            fiber_loss_db_per_km,
            lumped_loss_db,
        })
    }

    pub fn lossless() -> Self {
        Self {
            fiber_loss_db_per_km: 0.0,
            lumped_loss_db: 0.0,
        }
    }

    pub fn fiber_loss_db_per_km(&self) -> f64 {
        self.fiber_loss_db_per_km
    }

    pub fn lumped_loss_db(&self) -> f64 {
        self.lumped_loss_db
    }

    /// Total loss in dB over `length_m` of fiber plus the lumped elements.
    pub fn total_loss_db(&self, length_m: f64) -> f64 {
        self.fiber_loss_db_per_km * length_m / 1000.0 + self.lumped_loss_db
    }
}

/// How coincidences are counted within the jitter window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// Non-overlapping windows of width τ_jitter; a coincidence is a window
    /// holding at least one arrival on every detector.
    #[default]
    Binned,
    /// Every N-tuple (one arrival per detector) spanning at most τ_jitter.
    Sliding,
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowMode::Binned => f.write_str("binned"),
            WindowMode::Sliding => f.write_str("sliding"),
        }
    }
}

/// Detector timing and integration time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSpec {
    jitter_s: f64,
    measurement_time_s: f64,
    window_mode: WindowMode,
}

impl DetectionSpec {
    pub fn new(jitter_s: f64, measurement_time_s: f64, window_mode: WindowMode) -> Result<Self> {
        require_positive("jitter_s", jitter_s)?;
        require_positive("measurement_time_s", measurement_time_s)?;
        if jitter_s >= measurement_time_s {
            return Err(invalid(
                "jitter_s",
                format!("jitter {jitter_s} s must be shorter than the measurement time {measurement_time_s} s"),
            ));
        }
        Ok(Self {
            jitter_s,
            measurement_time_s,
            window_mode,
        })
    }

    pub fn jitter_s(&self) -> f64 {
        self.jitter_s
    }

    pub fn measurement_time_s(&self) -> f64 {
        self.measurement_time_s
    }

    pub fn window_mode(&self) -> WindowMode {
        self.window_mode
    }

    /// Same detectors, different integration time.
    pub fn with_measurement_time(&self, measurement_time_s: f64) -> Result<Self> {
        Self::new(self.jitter_s, measurement_time_s, self.window_mode)
    }

    pub fn with_jitter(&self, jitter_s: f64) -> Result<Self> {
        Self::new(jitter_s, self.measurement_time_s, self.window_mode)
    }

    pub fn with_window_mode(&self, window_mode: WindowMode) -> Self {
        Self {
            window_mode,
            ..*self
        }
    }
}

/// Operating point: rotation-induced phase plus the applied bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    sagnac_phase_rad: f64,
    bias_phase_rad: f64,
}

impl PhasePoint {
    pub fn new(sagnac_phase_rad: f64, bias_phase_rad: f64) -> Result<Self> {
        require_finite("sagnac_phase_rad", sagnac_phase_rad)?;
        require_finite("bias_phase_rad", bias_phase_rad)?;
        Ok(Self {
            sagnac_phase_rad,
            bias_phase_rad,
        })
    }

    /// A point given only by its total phase (no rotation).
    pub fn from_total(total_rad: f64) -> Result<Self> {
        Self::new(0.0, total_rad)
    }

    pub fn sagnac_phase_rad(&self) -> f64 {
        self.sagnac_phase_rad
    }

    pub fn bias_phase_rad(&self) -> f64 {
        self.bias_phase_rad
    }

    pub fn total(&self) -> f64 {
        self.sagnac_phase_rad + self.bias_phase_rad
    }

    /// Total phase reduced into `[0, 2π/N)`.
    pub fn reduced_total(&self, order: u32) -> f64 {
        reduce_phase(self.total(), order)
    }
}

/// Reduce a total phase into one fringe period `[0, 2π/N)`.
pub fn reduce_phase(phase_rad: f64, order: u32) -> f64 {
    let period = 2.0 * PI / order as f64;
    let r = phase_rad.rem_euclid(period);
    // rem_euclid can round up to the period itself
    if r >= period {
        0.0
    } else {
        r
    }
}
