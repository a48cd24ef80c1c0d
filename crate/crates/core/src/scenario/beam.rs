//! Gaussian beam model of a single VCSEL.

use crate::scalar::Real;
use crate::scenario::VcselParams;

/// Rayleigh range `π W0² n / λ`.
pub fn rayleigh_range<T: Real>(vcsel: &VcselParams<T>) -> T {
    T::PI() * vcsel.beam_waist * vcsel.beam_waist * vcsel.refractive_index / vcsel.wavelength
}

/// Beam radius `W(d) = W0 sqrt(1 + (d / d_Ra)²)` at axial distance `d`.
pub fn beam_radius<T: Real>(vcsel: &VcselParams<T>, d: T) -> T {
    let z = d / rayleigh_range(vcsel);
    vcsel.beam_waist * (T::one() + z * z).sqrt()
}

/// Transverse intensity (W/m²) at radial offset `r` from the beam axis and axial distance `d`,
/// for a beam carrying `power` watts.
pub fn intensity_with_power<T: Real>(vcsel: &VcselParams<T>, power: T, r: T, d: T) -> T {
    let w = beam_radius(vcsel, d);
    let w2 = w * w;
    T::lit(2.0) * power / (T::PI() * w2) * (-T::lit(2.0) * r * r / w2).exp()
}

/// Intensity of one VCSEL at its configured power `P_tr`.
pub fn vcsel_intensity<T: Real>(vcsel: &VcselParams<T>, r: T, d: T) -> T {
    intensity_with_power(vcsel, vcsel.power, r, d)
}
