//! Eye-safety limit on per-VCSEL optical power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EyeSafetyParams<T> {
    /// Aperture diameter of the cornea `d_c`, meters.
    pub cornea_diameter: T,
    /// Hazard distance `d_h` from the source, meters.
    pub hazard_distance: T,
    /// Maximum permissible exposure `E_e,max`, W/m².
    pub mpe: T,
    /// Lower bound `P_min` on per-VCSEL power, watts.
    pub min_power: T,
}

fn aperture_fraction<T: Real>(d_c: T, w: T) -> T {
    T::one() - (-(d_c * d_c) / (T::lit(2.0) * w * w)).exp()
}

/// Exposure `E_e(d_h)`: beam power through the cornea aperture divided by the aperture area,
/// for a beam of `power` watts and radius `w_at_dh` at the hazard distance.
pub fn exposure_level<T: Real>(es: &EyeSafetyParams<T>, power: T, w_at_dh: T) -> T {
    let r = es.cornea_diameter * T::lit(0.5);
    power / (T::PI() * r * r) * aperture_fraction(es.cornea_diameter, w_at_dh)
}

/// `P_max = (π/4) d_c² E_max / (1 − exp(−d_c² / 2W²))`.
pub fn max_permissible_power<T: Real>(es: &EyeSafetyParams<T>, w_at_dh: T) -> Result<T> {
    if !(es.cornea_diameter > T::zero()) {
        return Err(Error::EyeSafety("cornea diameter must be > 0".into()));
    }
    if !(w_at_dh > T::zero()) {
        return Err(Error::EyeSafety("beam radius at hazard distance must be > 0".into()));
    }
    let d2 = es.cornea_diameter * es.cornea_diameter;
    Ok(T::FRAC_PI_4() * d2 * es.mpe / aperture_fraction(es.cornea_diameter, w_at_dh))
}

pub fn is_safe<T: Real>(es: &EyeSafetyParams<T>, power: T, w_at_dh: T) -> bool {
    exposure_level(es, power, w_at_dh) <= es.mpe
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EyeSafetyParams<f64> {
        EyeSafetyParams {
            cornea_diameter: 7e-3,
            hazard_distance: 0.2,
            mpe: 1000.0,
            min_power: 1e-3,
        }
    }

    #[test]
    fn wide_aperture_limit() {
        let es = params();
        let p = max_permissible_power(&es, 1e-4).unwrap();
        let lim = std::f64::consts::FRAC_PI_4 * 49e-6 * 1000.0;
        assert!((p / lim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wide_beam_limit() {
        let es = params();
        let w = 5.0;
        let p = max_permissible_power(&es, w).unwrap();
        let lim = std::f64::consts::FRAC_PI_2 * 1000.0 * w * w;
        assert!((p / lim - 1.0).abs() < 1e-5, "{p} {lim}");
    }

    #[test]
    fn zero_cornea_is_an_error() {
        let mut es = params();
        es.cornea_diameter = 0.0;
        assert!(max_permissible_power(&es, 0.01).is_err());
    }

    #[test]
    fn limit_is_exactly_safe() {
        let es = params();
        let w = 0.0123;
        let p = max_permissible_power(&es, w).unwrap();
        assert!((exposure_level(&es, p, w) / es.mpe - 1.0).abs() < 1e-12);
        assert!(!is_safe(&es, p * 1.001, w));
    }
}
