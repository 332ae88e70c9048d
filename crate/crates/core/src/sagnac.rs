//! Ideal-interferometer relations: Sagnac phase, N00N coincidence rate,
//! shot-noise phase uncertainty and the minimum detectable rotation.

use std::f64::consts::PI;

use crate::error::{invalid, require_finite, Result};
use crate::model::{GyroGeometry, PhasePoint};

/// Angular velocity in rad/s. Negative values rotate the other way.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RotationRate(f64);

impl RotationRate {
    pub fn new(omega_rad_per_s: f64) -> Result<Self> {
        require_finite("omega_rad_per_s", omega_rad_per_s).map(Self)
    }

    pub fn rad_per_s(&self) -> f64 {
        self.0
    }
}

/// How the photon count in the shot-noise formula relates to N00N pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhotonBudget {
    /// Total photon number M, used as given.
    Photons(f64),
    /// Number of N00N states; M = N · pairs.
    Pairs(f64),
}

impl PhotonBudget {
    pub fn total_photons(&self, order: u32) -> f64 {
        match *self {
            PhotonBudget::Photons(m) => m,
            PhotonBudget::Pairs(p) => order as f64 * p,
        }
    }
}

/// Sagnac-Laue phase 4πΩLr/(λc) in radians.
pub fn sagnac_phase(omega: RotationRate, geom: &GyroGeometry) -> f64 {
    omega.rad_per_s() * geom.scale_factor_s()
}

/// Expected coincidence count (M/2)(1 + C cos(Nφ)) for `pairs` N00N states.
pub fn coincidence_probability(pairs: f64, phase: PhasePoint, order: u32, coherence: f64) -> Result<f64> {
    if !(pairs.is_finite() && pairs >= 0.0) {
        return Err(invalid("pairs", format!("must be >= 0, got {pairs}")));
    }
    if !(0.0..=1.0).contains(&coherence) {
        return Err(invalid("coherence", format!("must lie in [0, 1], got {coherence}")));
    }
    let fringe = (order as f64 * phase.total()).cos();
    Ok(0.5 * pairs * (1.0 + coherence * fringe))
}

/// Shot-noise phase uncertainty 1/√(NM) for an order-N state and M photons.
pub fn shot_noise(order: u32, total_photons: f64) -> Result<f64> {
    if order < 1 {
        return Err(invalid("order", "must be >= 1"));
    }
    if !(total_photons.is_finite() && total_photons > 0.0) {
        return Err(invalid(
            "total_photons",
            format!("shot noise is undefined for M = {total_photons}"),
        ));
    }
    Ok(1.0 / (order as f64 * total_photons).sqrt())
}

/// Shot noise for a photon budget given either as photons or N00N pairs.
pub fn shot_noise_for(order: u32, budget: PhotonBudget) -> Result<f64> {
    shot_noise(order, budget.total_photons(order))
}

/// Rotation rate whose Sagnac phase equals the shot-noise uncertainty,
/// λc/(4πLr√(NM)).
pub fn omega_min(geom: &GyroGeometry, order: u32, total_photons: f64) -> Result<RotationRate> {
    let dphi = shot_noise(order, total_photons)?;
    RotationRate::new(dphi / geom.scale_factor_s())
}

/// Inverse of [`sagnac_phase`].
pub fn rotation_for_phase(phase_rad: f64, geom: &GyroGeometry) -> Result<RotationRate> {
    RotationRate::new(phase_rad / geom.scale_factor_s())
}

/// Fringe period 2π/N of the coincidence rate in total phase.
pub fn fringe_period(order: u32) -> f64 {
    2.0 * PI / order as f64
}
