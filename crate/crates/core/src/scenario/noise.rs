//! Receiver noise variance.
//!
//! Two modes. `SnrTarget` back-solves `σ_z²` so that a reference link (a user
//! at the centre of AP 0's footprint, photodiode facing up) sees the requested
//! electrical SNR `(ζ ρ s)² / σ_z²`. `Physical` sums laser RIN over the
//! bandwidth with a configured thermal floor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NoiseMode<T> {
    SnrTarget { snr_db: T },
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel<T> {
    pub mode: NoiseMode<T>,
    /// Hz.
    pub bandwidth: T,
    /// Relative intensity noise of the laser, dB/Hz.
    pub rin_db_per_hz: T,
    /// Additive thermal floor used in physical mode.
    pub thermal_variance: T,
}

/// Received optical power `s` (W) of the reference link together with the
/// receiver constants that turn it into an electrical signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceLink<T> {
    pub received_power: T,
    pub responsivity: T,
    pub electro_optic: T,
}

impl<T: Real> ReferenceLink<T> {
    /// `(ζ ρ s)²`.
    pub fn electrical_power(&self) -> T {
        let a = self.responsivity * self.electro_optic * self.received_power;
        a * a
    }
}

pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// RIN contribution `10^(RIN/10) · P_rx² · B`.
pub fn rin_variance<T: Real>(rin_db_per_hz: T, bandwidth: T, received_power: T) -> T {
    db_to_linear(rin_db_per_hz) * received_power * received_power * bandwidth
}

/// `σ_z²` for the configured mode. `snr_db` overrides the target of SNR mode
/// and forces SNR mode when given.
pub fn noise_variance<T: Real>(
    nm: &NoiseModel<T>,
    reference: Option<&ReferenceLink<T>>,
    snr_db: Option<T>,
) -> Result<T> {
    let reference = reference.ok_or_else(|| Error::Noise("undefined reference link".into()))?;
    if !(reference.received_power > T::zero()) {
        return Err(Error::Noise("reference link receives no power".into()));
    }
    let target = match (snr_db, nm.mode) {
        (Some(s), _) => Some(s),
        (None, NoiseMode::SnrTarget { snr_db }) => Some(snr_db),
        (None, NoiseMode::Physical) => None,
    };
    let var = match target {
        Some(s) => reference.electrical_power() / db_to_linear(s),
        None => rin_variance(nm.rin_db_per_hz, nm.bandwidth, reference.received_power) + nm.thermal_variance,
    };
    if var > T::zero() {
        Ok(var)
    } else {
        Err(Error::NonPositiveNoise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(mode: NoiseMode<f64>) -> NoiseModel<f64> {
        NoiseModel {
            mode,
            bandwidth: 1.5e9,
            rin_db_per_hz: -155.0,
            thermal_variance: 0.0,
        }
    }

    const REF: ReferenceLink<f64> = ReferenceLink {
        received_power: 2e-3,
        responsivity: 0.9,
        electro_optic: 1.0,
    };

    #[test]
    fn snr_zero_db_equals_signal_power() {
        let v = noise_variance(&model(NoiseMode::SnrTarget { snr_db: 0.0 }), Some(&REF), None).unwrap();
        assert!((v - (0.9 * 2e-3f64).powi(2)).abs() < 1e-18);
    }

    #[test]
    fn snr_thirty_db_divides_by_thousand() {
        let v = noise_variance(&model(NoiseMode::Physical), Some(&REF), Some(30.0)).unwrap();
        assert!((v - (0.9 * 2e-3f64).powi(2) / 1000.0).abs() < 1e-20);
    }

    #[test]
    fn rin_arithmetic() {
        let v: f64 = rin_variance(-155.0, 1.5e9, 1e-3);
        assert!((v - 4.743_416e-13).abs() < 1e-18, "{v}");
        let r = ReferenceLink {
            received_power: 1e-3,
            ..REF
        };
        let mut m = model(NoiseMode::Physical);
        m.thermal_variance = 1e-15;
        let total = noise_variance(&m, Some(&r), None).unwrap();
        assert!((total - (v + 1e-15)).abs() < 1e-24);
    }

    #[test]
    fn missing_reference_is_an_error() {
        assert!(noise_variance(&model(NoiseMode::Physical), None, None).is_err());
    }
}
