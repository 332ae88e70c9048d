//! Coherence and dispersion corrections: coherence time, the coherence
//! factor C = exp(−3.5 Δt²/τ²), chromatic and polarization-mode delays, and
//! the phase error from pump wavelength drift.
//!
//! The same 3.5 constant is used for every delay source. For the chromatic
//! term the constant is only known up to an O(1) factor.

use crate::error::{invalid, require_non_negative, require_positive, Result};
use crate::model::SPEED_OF_LIGHT_M_PER_S;

const COHERENCE_EXPONENT: f64 = 3.5;

const PS: f64 = 1e-12;
const NM: f64 = 1e-9;

/// Source spectrum: center wavelength and linewidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSpec {
    center_wavelength_m: f64,
    linewidth_m: f64,
}

impl SpectralSpec {
    pub fn new(center_wavelength_m: f64, linewidth_m: f64) -> Result<Self> {
        require_positive("center_wavelength_m", center_wavelength_m)?;
        require_positive("linewidth_m", linewidth_m)?;
        if linewidth_m >= center_wavelength_m {
            return Err(invalid(
                "linewidth_m",
                format!("linewidth {linewidth_m} m must be below the center wavelength {center_wavelength_m} m"),
            ));
        }
        Ok(Self {
            center_wavelength_m,
            linewidth_m,
        })
    }

    pub fn center_wavelength_m(&self) -> f64 {
        self.center_wavelength_m
    }

    pub fn linewidth_m(&self) -> f64 {
        self.linewidth_m
    }
}

/// Fiber dispersion coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSpec {
    chromatic_coeff_ps_per_km_nm: f64,
    pmd_coeff_ps_per_sqrt_km: f64,
}

impl DispersionSpec {
    /// Typical polarization-maintaining fiber: 0.01 ps/(km·nm) between axes.
    pub const DEFAULT_CHROMATIC_PS_PER_KM_NM: f64 = 0.01;
    pub const DEFAULT_PMD_PS_PER_SQRT_KM: f64 = 0.1;

    pub fn new(chromatic_coeff_ps_per_km_nm: f64, pmd_coeff_ps_per_sqrt_km: f64) -> Result<Self> {
        require_non_negative("chromatic_coeff_ps_per_km_nm", chromatic_coeff_ps_per_km_nm)?;
        require_non_negative("pmd_coeff_ps_per_sqrt_km", pmd_coeff_ps_per_sqrt_km)?;
        Ok(Self {
            chromatic_coeff_ps_per_km_nm,
            pmd_coeff_ps_per_sqrt_km,
        })
    }

    pub fn chromatic_coeff_ps_per_km_nm(&self) -> f64 {
        self.chromatic_coeff_ps_per_km_nm
    }

    pub fn pmd_coeff_ps_per_sqrt_km(&self) -> f64 {
        self.pmd_coeff_ps_per_sqrt_km
    }
}

impl Default for DispersionSpec {
    fn default() -> Self {
        Self {
            chromatic_coeff_ps_per_km_nm: Self::DEFAULT_CHROMATIC_PS_PER_KM_NM,
            pmd_coeff_ps_per_sqrt_km: Self::DEFAULT_PMD_PS_PER_SQRT_KM,
        }
    }
}

/// τ = λ²/(cΔλ), seconds.
pub fn coherence_time(spec: &SpectralSpec) -> f64 {
    spec.center_wavelength_m.powi(2) / (SPEED_OF_LIGHT_M_PER_S * spec.linewidth_m)
}

/// C = exp(−3.5 Δt²/τ²).
pub fn coherence_factor(delta_t_s: f64, tau_s: f64) -> Result<f64> {
    require_positive("tau_s", tau_s)?;
    if !delta_t_s.is_finite() {
        return Err(invalid("delta_t_s", "must be finite"));
    }
    Ok((-COHERENCE_EXPONENT * (delta_t_s / tau_s).powi(2)).exp())
}

/// Arrival-time spread between the fast and slow axes, seconds.
pub fn chromatic_delay(disp: &DispersionSpec, length_m: f64, spec: &SpectralSpec) -> Result<f64> {
    require_non_negative("length_m", length_m)?;
    let km = length_m / 1000.0;
    let nm = spec.linewidth_m / NM;
    Ok(disp.chromatic_coeff_ps_per_km_nm * km * nm * PS)
}

/// Polarization-mode dispersion spread coeff·√L, seconds.
pub fn pmd_delay(disp: &DispersionSpec, length_m: f64) -> Result<f64> {
    require_non_negative("length_m", length_m)?;
    Ok(disp.pmd_coeff_ps_per_sqrt_km * (length_m / 1000.0).sqrt() * PS)
}

/// Relative and absolute Sagnac phase error from a pump wavelength drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpDriftError {
    pub relative: f64,
    pub absolute_rad: f64,
}

/// The Sagnac phase scales as 1/λ, so a wavelength excursion δλ shifts it by
/// δλ/λ relative.
pub fn pump_drift_phase_error(
    drift_nm_per_degc: f64,
    stability_degc: f64,
    spec: &SpectralSpec,
    sagnac_phase_rad: f64,
) -> Result<PumpDriftError> {
    require_non_negative("drift_nm_per_degc", drift_nm_per_degc)?;
    require_non_negative("stability_degc", stability_degc)?;
    if !sagnac_phase_rad.is_finite() {
        return Err(invalid("sagnac_phase_rad", "must be finite"));
    }
    let relative = drift_nm_per_degc * stability_degc * NM / spec.center_wavelength_m;
    Ok(PumpDriftError {
        relative,
        absolute_rad: relative * sagnac_phase_rad,
    })
}

/// Coherence factors from each delay source and their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceBreakdown {
    pub coherence_time_s: f64,
    pub base: f64,
    pub reciprocal: f64,
    pub chromatic: f64,
    pub pmd: f64,
    pub chromatic_delay_s: f64,
    pub pmd_delay_s: f64,
}

impl CoherenceBreakdown {
    pub fn total(&self) -> f64 {
        self.base * self.reciprocal * self.chromatic * self.pmd
    }
}

/// Combine a measured base coherence with the computed dispersion factors.
pub fn coherence_breakdown(
    base: f64,
    reciprocal_delay_s: f64,
    disp: &DispersionSpec,
    length_m: f64,
    spec: &SpectralSpec,
) -> Result<CoherenceBreakdown> {
    if !(base > 0.0 && base <= 1.0) {
        return Err(invalid("base_coherence", format!("must lie in (0, 1], got {base}")));
    }
    let tau = coherence_time(spec);
    let chromatic_delay_s = chromatic_delay(disp, length_m, spec)?;
    let pmd_delay_s = pmd_delay(disp, length_m)?;
    Ok(CoherenceBreakdown {
        coherence_time_s: tau,
        base,
        reciprocal: coherence_factor(reciprocal_delay_s, tau)?,
        chromatic: coherence_factor(chromatic_delay_s, tau)?,
        pmd: coherence_factor(pmd_delay_s, tau)?,
        chromatic_delay_s,
        pmd_delay_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhasePoint;
    use crate::sagnac::coincidence_probability;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spectrum(lw_nm: f64) -> SpectralSpec {
        SpectralSpec::new(1550e-9, lw_nm * 1e-9).unwrap()
    }

    #[test]
    fn coherence_time_examples() {
        let tau1 = coherence_time(&spectrum(1.0));
        assert_relative_eq!(tau1, 8.0e-12, max_relative = 0.02);
        let tau2 = coherence_time(&spectrum(2.0));
        assert_relative_eq!(tau2, tau1 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(tau2, 4.0e-12, max_relative = 0.02);
    }

    #[test]
    fn coherence_factor_examples() {
        assert_eq!(coherence_factor(0.0, 8e-12).unwrap(), 1.0);
        assert_relative_eq!(coherence_factor(8e-12, 8e-12).unwrap(), (-3.5f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(coherence_factor(8e-12, 8e-12).unwrap(), 0.0302, max_relative = 1e-3);
        assert_relative_eq!(coherence_factor(0.02e-12, 8e-12).unwrap(), 0.999978, max_relative = 1e-6);
        assert!(coherence_factor(1.0, 0.0).is_err());
    }

    #[test]
    fn chromatic_examples() {
        let d = DispersionSpec::default();
        assert_eq!(chromatic_delay(&d, 0.0, &spectrum(1.0)).unwrap(), 0.0);
        let dt = chromatic_delay(&d, 2000.0, &spectrum(1.0)).unwrap();
        assert_relative_eq!(dt, 0.02e-12, max_relative = 1e-12);
        let b = coherence_breakdown(0.96, 0.0, &d, 2000.0, &spectrum(1.0)).unwrap();
        assert!(b.chromatic >= 0.9999);
        assert!(b.base * b.chromatic >= 0.96 * 0.9999);
    }

    #[test]
    fn pmd_examples() {
        let d = DispersionSpec::new(0.01, 0.5).unwrap();
        assert_eq!(pmd_delay(&d, 0.0).unwrap(), 0.0);
        let dt = pmd_delay(&d, 4000.0).unwrap();
        assert_relative_eq!(dt, 1.0e-12, max_relative = 1e-12);
        let c = coherence_factor(dt, 8e-12).unwrap();
        // exp(−3.5/64)
        assert_relative_eq!(c, 0.94677, max_relative = 1e-4);
    }

    #[test]
    fn pump_drift_examples() {
        let s = spectrum(1.0);
        let none = pump_drift_phase_error(0.2, 0.0, &s, 5.5e-3).unwrap();
        assert_eq!((none.relative, none.absolute_rad), (0.0, 0.0));
        let e = pump_drift_phase_error(0.2, 0.01, &s, 5.5e-3).unwrap();
        assert_relative_eq!(e.relative, 1.29e-6, max_relative = 0.01);
        assert_relative_eq!(e.absolute_rad, 7.1e-9, max_relative = 0.01);
    }

    #[test]
    fn spectral_invariants() {
        assert!(SpectralSpec::new(1550e-9, 2000e-9).is_err());
        assert!(SpectralSpec::new(1550e-9, 0.0).is_err());
        assert!(DispersionSpec::new(-1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn factor_bounded_and_monotone(dt in 0.0f64..1e-10, extra in 1e-15f64..1e-11, tau in 1e-13f64..1e-10) {
            let c1 = coherence_factor(dt, tau).unwrap();
            let c2 = coherence_factor(dt + extra, tau).unwrap();
            prop_assert!(c1 > 0.0 || dt / tau > 10.0);
            prop_assert!(c1 <= 1.0);
            prop_assert!(c2 <= c1);
        }

        #[test]
        fn coherence_keeps_extrema_positions(c in 0.05f64..1.0, order in 2u32..6) {
            // maxima stay at 2nπ/N and minima at (2n+1)π/N, only the contrast drops
            let step = std::f64::consts::PI / order as f64;
            let at = |phi: f64| coincidence_probability(1e4, PhasePoint::from_total(phi).unwrap(), order, c).unwrap();
            let eps = 1e-3 * step;
            prop_assert!(at(0.0) > at(eps) && at(0.0) > at(-eps));
            prop_assert!(at(step) < at(step + eps) && at(step) < at(step - eps));
            prop_assert!((at(0.0) - at(step) - 1e4 * c).abs() < 1e-6);
        }
    }
}
