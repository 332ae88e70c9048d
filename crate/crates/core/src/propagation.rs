//! Loss propagation of N00N pairs and uncorrelated single photons.
//!
//! A pair survives only if both photons do (factor T²). A pair that loses one
//! photon adds a single to the uncorrelated stream, which is then attenuated
//! like any other single (factor T). The closed form is
//!
//! ```text
//! pairs'   = pairs · T²
//! singles' = T · (singles + pairs · (1 − T))
//! ```

use crate::error::{invalid, require_non_negative, Error, Result};
use crate::model::OpticalPath;

/// N00N pairs and uncorrelated singles (total across detectors).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonPopulations {
    noon_pairs: f64,
    singles: f64,
}

impl PhotonPopulations {
    pub fn new(noon_pairs: f64, singles: f64) -> Result<Self> {
        require_non_negative("noon_pairs", noon_pairs)?;
        require_non_negative("singles", singles)?;
        Ok(Self { noon_pairs, singles })
    }

    /// Normalized populations with the given N00N fraction at the source.
    pub fn from_fraction(noon_fraction: f64) -> Result<Self> {
        if !(noon_fraction > 0.0 && noon_fraction <= 1.0) {
            return Err(invalid("noon_fraction", format!("must lie in (0, 1], got {noon_fraction}")));
        }
        Self::new(noon_fraction, 1.0 - noon_fraction)
    }

    pub fn noon_pairs(&self) -> f64 {
        self.noon_pairs
    }

    pub fn singles(&self) -> f64 {
        self.singles
    }

    /// Photon number carried by both populations for an order-N state.
    pub fn photon_number(&self, order: u32) -> f64 {
        order as f64 * self.noon_pairs + self.singles
    }
}

fn check_transmission(t: f64) -> Result<f64> {
    if t > 0.0 && t <= 1.0 {
        Ok(t)
    } else {
        Err(invalid("transmission", format!("must lie in (0, 1], got {t}")))
    }
}

/// Single-photon transmission 10^(−loss/10) over `length_m` plus lumped losses.
pub fn fiber_transmission(path: &OpticalPath, length_m: f64) -> Result<f64> {
    require_non_negative("length_m", length_m)?;
    let t = 10f64.powf(-path.total_loss_db(length_m) / 10.0);
    if t > 0.0 {
        Ok(t)
    } else {
        Err(invalid(
            "length_m",
            format!("total loss {} dB underflows the transmission", path.total_loss_db(length_m)),
        ))
    }
}

/// Loss in dB for a given transmission; the inverse of [`fiber_transmission`].
pub fn transmission_to_db(t: f64) -> Result<f64> {
    Ok(-10.0 * check_transmission(t)?.log10())
}

/// Apply transmission `t` to both populations.
pub fn propagate_populations(initial: PhotonPopulations, t: f64) -> Result<PhotonPopulations> {
    let t = check_transmission(t)?;
    let pairs = initial.noon_pairs * t * t;
    let singles = t * (initial.singles + initial.noon_pairs * (1.0 - t));
    PhotonPopulations::new(pairs, singles)
}

/// N00N fraction M_N00N / (M_N00N + M_1).
pub fn noon_ratio(pop: PhotonPopulations) -> Result<f64> {
    let total = pop.noon_pairs + pop.singles;
    if total > 0.0 {
        Ok(pop.noon_pairs / total)
    } else {
        Err(Error::Undefined("N00N ratio of empty populations".into()))
    }
}

/// Uncorrelated single-photon rate implied by a N00N rate and ratio R.
pub fn singles_rate_from_ratio(noon_rate_hz: f64, ratio: f64) -> Result<f64> {
    require_non_negative("noon_rate_hz", noon_rate_hz)?;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(invalid("ratio", format!("must lie in (0, 1], got {ratio}")));
    }
    Ok(noon_rate_hz * (1.0 - ratio) / ratio)
}

/// Populations tabulated at `samples` evenly spaced lengths from 0 to `length_m`.
pub fn propagate_along_fiber(
    initial: PhotonPopulations,
    path: &OpticalPath,
    length_m: f64,
    samples: usize,
) -> Result<Vec<(f64, PhotonPopulations)>> {
    if samples < 2 {
        return Err(invalid("samples", format!("need at least 2, got {samples}")));
    }
    require_non_negative("length_m", length_m)?;
    let step = length_m / (samples - 1) as f64;
    (0..samples)
        .map(|i| {
            // exact endpoint rather than accumulated step
            let l = if i + 1 == samples { length_m } else { step * i as f64 };
            let t = fiber_transmission(path, l)?;
            Ok((l, propagate_populations(initial, t)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pop(p: f64, s: f64) -> PhotonPopulations {
        PhotonPopulations::new(p, s).unwrap()
    }

    #[test]
    fn transmission_examples() {
        let ten = OpticalPath::new(0.0, 10.0).unwrap();
        assert_relative_eq!(fiber_transmission(&ten, 0.0).unwrap(), 0.1, max_relative = 1e-14);
        let proj = OpticalPath::new(0.0, 6.65).unwrap();
        assert_relative_eq!(fiber_transmission(&proj, 0.0).unwrap(), 0.216, max_relative = 0.005);
        assert_eq!(fiber_transmission(&OpticalPath::lossless(), 5000.0).unwrap(), 1.0);
        let fiber = OpticalPath::new(2.5, 0.0).unwrap();
        assert_relative_eq!(fiber_transmission(&fiber, 4000.0).unwrap(), 0.1, max_relative = 1e-14);
        assert_relative_eq!(transmission_to_db(0.1).unwrap(), 10.0, max_relative = 1e-14);
    }

    #[test]
    fn lossless_is_identity() {
        let p = pop(0.3, 0.7);
        assert_eq!(propagate_populations(p, 1.0).unwrap(), p);
    }

    #[test]
    fn ten_db_example() {
        let out = propagate_populations(pop(0.95, 0.05), 0.1).unwrap();
        assert_relative_eq!(out.noon_pairs(), 0.0095, max_relative = 1e-12);
        assert_relative_eq!(out.singles(), 0.0905, max_relative = 1e-12);
        assert_relative_eq!(noon_ratio(out).unwrap(), 0.095, max_relative = 1e-12);
    }

    #[test]
    fn projected_example() {
        let out = propagate_populations(pop(0.95, 0.05), 0.216).unwrap();
        assert!((noon_ratio(out).unwrap() - 0.205).abs() < 0.005);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(noon_ratio(pop(1.0, 0.0)).unwrap(), 1.0);
        assert_relative_eq!(noon_ratio(pop(0.0095, 0.0905)).unwrap(), 0.095, max_relative = 1e-12);
        assert_eq!(noon_ratio(pop(1.0, 1.0)).unwrap(), 0.5);
        assert!(matches!(noon_ratio(pop(0.0, 0.0)), Err(Error::Undefined(_))));
    }

    #[test]
    fn singles_rate_examples() {
        assert_relative_eq!(singles_rate_from_ratio(4e3, 0.095).unwrap(), 38.1e3, max_relative = 0.01);
        let projected = singles_rate_from_ratio(10e3, 0.205).unwrap();
        assert_relative_eq!(projected, 38.78e3, max_relative = 1e-3);
        assert!((38e3..=40e3).contains(&projected));
        assert_eq!(singles_rate_from_ratio(1234.5, 0.5).unwrap(), 1234.5);
        assert!(singles_rate_from_ratio(1.0, 0.0).is_err());
    }

    #[test]
    fn tabulation_endpoints() {
        let init = pop(0.95, 0.05);
        let path = OpticalPath::new(0.2, 0.0).unwrap();
        let zero = propagate_along_fiber(init, &path, 0.0, 5).unwrap();
        assert_eq!(zero.first().unwrap().1, init);
        assert_eq!(zero.last().unwrap().1, init);

        let path = OpticalPath::new(2.0, 0.0).unwrap();
        let table = propagate_along_fiber(init, &path, 5000.0, 11).unwrap();
        assert_eq!(table.len(), 11);
        let end = table.last().unwrap().1;
        let direct = propagate_populations(init, 0.1).unwrap();
        assert_relative_eq!(end.noon_pairs(), direct.noon_pairs(), max_relative = 1e-12);
        assert_relative_eq!(end.singles(), direct.singles(), max_relative = 1e-12);
        assert!(propagate_along_fiber(init, &path, 10.0, 1).is_err());
    }

    #[test]
    fn long_fiber_ratio_tracks_transmission() {
        // At 60 dB the ratio behaves as R ∝ T: the log-log slope is 1.
        let init = pop(0.95, 0.05);
        let ratio_at = |db: f64| {
            let t = 10f64.powf(-db / 10.0);
            noon_ratio(propagate_populations(init, t).unwrap()).unwrap()
        };
        let (d1, d2) = (59.0, 61.0);
        let slope = (ratio_at(d2).ln() - ratio_at(d1).ln()) / ((-d2 / 10.0) - (-d1 / 10.0)) / 10f64.ln();
        assert_relative_eq!(slope, 1.0, max_relative = 0.01);
        let t = 1e-6;
        assert_relative_eq!(ratio_at(60.0), 0.95 * t / (0.95 + 0.05), max_relative = 0.01);
    }

    proptest! {
        #[test]
        fn composition(p in 0.0f64..1e6, s in 0.0f64..1e6, t1 in 1e-4f64..=1.0, t2 in 1e-4f64..=1.0) {
            let init = pop(p, s);
            let two = propagate_populations(propagate_populations(init, t1).unwrap(), t2).unwrap();
            let one = propagate_populations(init, t1 * t2).unwrap();
            let tol = 1e-12 * (p + s).max(1e-300);
            prop_assert!((two.noon_pairs() - one.noon_pairs()).abs() <= tol);
            prop_assert!((two.singles() - one.singles()).abs() <= tol);
        }

        #[test]
        fn ratio_monotone_in_transmission(p in 1e-6f64..1.0, s in 0.0f64..1.0, t in 1e-3f64..1.0, f in 0.01f64..0.99) {
            let init = pop(p, s);
            let hi = noon_ratio(propagate_populations(init, t).unwrap()).unwrap();
            let lo = noon_ratio(propagate_populations(init, t * f).unwrap()).unwrap();
            prop_assert!(lo < hi);
        }

        #[test]
        fn photon_number_never_grows(p in 0.0f64..1e6, s in 0.0f64..1e6, t in 1e-4f64..=1.0, order in 2u32..8) {
            let init = pop(p, s);
            let out = propagate_populations(init, t).unwrap();
            prop_assert!(out.photon_number(order) <= init.photon_number(order) * (1.0 + 1e-12));
        }
    }
}
