//! Common and private SINRs and the achievable rates of rate splitting on top of the
//! aligned outer precoder.
//!
//! A user's rate for a stream with scalar SINR `γ` over an alignment block is
//! `b log₂ det(I + γ H Hᵀ R⁻¹)`, where `H` is its `L × L` block channel and `R` the
//! post-cancellation noise covariance in units of `σ_z²` (the SINR already carries
//! `σ_z²`). Everything the optimizer needs about `H` and `R` is the spectrum `λ` of
//! `R^{-1/2} H Hᵀ R^{-1/2}`, so rates are evaluated as `b Σ log₂(1 + γ λ_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// `1 / (2πe)`: peak-limited capacity factor when the bias sits mid-range.
pub fn capacity_constant<T: Real>() -> T {
    T::one() / (T::lit(2.0) * T::PI() * T::E())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrInputs<T> {
    pub c: T,
    pub rho: T,
    pub zeta: T,
    pub wc_sq: T,
    pub wp_sq: T,
    pub sigma_sq: T,
}

impl<T: Real> SinrInputs<T> {
    /// Unit precoders and `c = 1/(2πe)`.
    pub fn new(rho: T, zeta: T, sigma_sq: T) -> Self {
        Self {
            c: capacity_constant(),
            rho,
            zeta,
            wc_sq: T::one(),
            wp_sq: T::one(),
            sigma_sq,
        }
    }

    /// `c ρ² ζ²`.
    pub fn gain(&self) -> T {
        self.c * self.rho * self.rho * self.zeta * self.zeta
    }

    fn check(&self) -> Result<()> {
        if self.sigma_sq > T::zero() {
            Ok(())
        } else {
            Err(Error::NonPositiveNoise)
        }
    }
}

/// SINR of a group's common message with all private messages as noise.
pub fn sinr_common<T: Real>(p_c: T, p_p: &[T], inp: &SinrInputs<T>) -> Result<T> {
    inp.check()?;
    let a = inp.gain();
    let interf: T = p_p.iter().copied().sum::<T>() * inp.wp_sq;
    Ok(a * p_c * inp.wc_sq / (a * interf + inp.sigma_sq))
}

/// SINR of user `k`'s private message with the other private messages as noise.
pub fn sinr_private<T: Real>(k: usize, p_p: &[T], inp: &SinrInputs<T>) -> Result<T> {
    inp.check()?;
    let a = inp.gain();
    let interf: T = p_p.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &p)| p).sum::<T>() * inp.wp_sq;
    Ok(a * p_p[k] * inp.wp_sq / (a * interf + inp.sigma_sq))
}

/// Eigenvalues of `R^{-1/2} H Hᵀ R^{-1/2}` for SPD `R`, ascending.
pub fn spectrum<T: Real>(h: &Matrix<T>, r: &Matrix<T>) -> Result<Vec<T>> {
    let l = r.cholesky().ok_or(Error::SingularCovariance)?;
    let li = l.inverse().ok_or(Error::SingularCovariance)?;
    let a = li.matmul(h);
    Ok(a.gram().symmetric_eigenvalues().into_iter().map(|v| v.max(T::zero())).collect())
}

/// `log₂ det(I + γ H Hᵀ R⁻¹)` evaluated as `log det(R + γ H Hᵀ) − log det R`.
pub fn log_det_rate<T: Real>(gamma: T, h: &Matrix<T>, r: &Matrix<T>) -> Result<T> {
    let ld_r = r.ln_det_spd().ok_or(Error::SingularCovariance)?;
    let ld = r.add(&h.gram().scale(gamma)).ln_det_spd().ok_or(Error::SingularCovariance)?;
    Ok((ld - ld_r) / T::LN_2())
}

/// `b Σ log₂(1 + γ λ_i)`.
pub fn rate_from_spectrum<T: Real>(b: T, gamma: T, spec: &[T]) -> T {
    b * spec.iter().map(|&l| (gamma * l).ln_1p()).sum::<T>() / T::LN_2()
}

/// `d/dγ` of [`rate_from_spectrum`].
pub fn rate_slope<T: Real>(b: T, gamma: T, spec: &[T]) -> T {
    b * spec.iter().map(|&l| l / (T::one() + gamma * l)).sum::<T>() / T::LN_2()
}

/// Common rate of a group: decodable by every member, so the weakest member sets it.
pub fn group_common_rate<T: Real>(b: T, gamma_c: T, spectra: &[&[T]]) -> T {
    if spectra.is_empty() {
        return T::zero();
    }
    spectra
        .iter()
        .map(|s| rate_from_spectrum(b, gamma_c, s))
        .fold(T::infinity(), T::min)
}

pub fn group_private_rates<T: Real>(b: T, gamma_p: &[T], spectra: &[&[T]]) -> Vec<T> {
    gamma_p.iter().zip(spectra).map(|(&g, s)| rate_from_spectrum(b, g, s)).collect()
}

/// Picks `L` of the `M` photodiode modes greedily by volume (largest residual after
/// projecting out the modes already chosen). The first pick, the strongest mode, is
/// placed last: that position is the interference-free dedicated slot.
pub fn select_modes<T: Real>(h: &Matrix<T>, l: usize) -> Vec<usize> {
    let m = h.rows();
    let mut chosen: Vec<usize> = Vec::with_capacity(l);
    let mut resid: Vec<Vec<T>> = (0..m).map(|i| h.row(i).to_vec()).collect();
    let norm = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>();
    for _ in 0..l.min(m) {
        let best = (0..m)
            .filter(|i| !chosen.contains(i))
            .max_by(|&i, &j| norm(&resid[i]).partial_cmp(&norm(&resid[j])).unwrap())
            .unwrap();
        chosen.push(best);
        let n = norm(&resid[best]);
        if n > T::zero() {
            let q: Vec<T> = resid[best].iter().map(|&x| x / n.sqrt()).collect();
            for r in resid.iter_mut() {
                let d: T = r.iter().zip(&q).map(|(&a, &b)| a * b).sum();
                for (x, &qq) in r.iter_mut().zip(&q) {
                    *x = *x - d * qq;
                }
            }
        }
    }
    if !chosen.is_empty() {
        let first = chosen.remove(0);
        chosen.push(first);
    }
    chosen
}

/// Everything needed to evaluate rates of a grouped network for any power allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState<T> {
    /// Member users of each group.
    pub groups: Vec<Vec<usize>>,
    /// Per-user spectrum of its block channel against the post-cancellation noise.
    pub spectra: Vec<Vec<T>>,
    /// Fraction of time per alignment block, `1/(G+L-1)` (1 for a single AP).
    pub b: T,
    pub inputs: SinrInputs<T>,
    /// Network power budget `P_T` in normalized units.
    pub p_total: T,
    /// Watts per normalized power unit.
    pub power_unit: T,
    /// Fixed consumption (W) added to the allocated power in energy efficiency.
    pub overhead: T,
    /// Per-user multiplier on the noise variance; empty means all ones.
    #[serde(default)]
    pub noise_scale: Vec<T>,
}

impl<T: Real> NetworkState<T> {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn member_spectra(&self, g: usize) -> Vec<&[T]> {
        self.groups[g].iter().map(|&k| self.spectra[k].as_slice()).collect()
    }

    /// SINR inputs seen by user `k`.
    pub fn user_inputs(&self, k: usize) -> SinrInputs<T> {
        let mut inp = self.inputs;
        if let Some(&s) = self.noise_scale.get(k) {
            inp.sigma_sq = inp.sigma_sq * s;
        }
        inp
    }

    /// `(γ_c, γ_p)` of each member of group `g`.
    pub fn member_sinrs(&self, g: usize, p_c: T, p_p: &[T]) -> Vec<(T, T)> {
        self.groups[g]
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let inp = self.user_inputs(k);
                (
                    sinr_common(p_c, p_p, &inp).unwrap_or(T::zero()),
                    sinr_private(i, p_p, &inp).unwrap_or(T::zero()),
                )
            })
            .collect()
    }

    /// `(R_c, [R_p])` of group `g`.
    pub fn group_rates(&self, g: usize, p_c: T, p_p: &[T]) -> (T, Vec<T>) {
        let sp = self.member_spectra(g);
        let sinr = self.member_sinrs(g, p_c, p_p);
        if sp.is_empty() {
            return (T::zero(), Vec::new());
        }
        let rc = sinr
            .iter()
            .zip(&sp)
            .map(|(&(gc, _), s)| rate_from_spectrum(self.b, gc, s))
            .fold(T::infinity(), T::min);
        let rp = sinr.iter().zip(&sp).map(|(&(_, gp), s)| rate_from_spectrum(self.b, gp, s)).collect();
        (rc, rp)
    }

    pub fn group_sum_rate(&self, g: usize, p_c: T, p_p: &[T]) -> T {
        let (rc, rp) = self.group_rates(g, p_c, p_p);
        rc + rp.into_iter().sum::<T>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation<T> {
    pub p_c: Vec<T>,
    /// `p_p[g][i]`: private power of the `i`-th member of group `g`.
    pub p_p: Vec<Vec<T>>,
    pub p_g_max: Vec<T>,
    /// Per-message private cap `P_p^T`.
    pub p_p_cap: T,
    pub p_total: T,
}

impl<T: Real> PowerAllocation<T> {
    pub fn group_power(&self, g: usize) -> T {
        self.p_c[g] + self.p_p[g].iter().copied().sum::<T>()
    }

    pub fn consumed(&self) -> T {
        (0..self.p_c.len()).map(|g| self.group_power(g)).sum()
    }

    /// Largest violation of the power constraints (0 when feasible).
    pub fn max_violation(&self) -> T {
        let mut v = T::zero();
        for g in 0..self.p_c.len() {
            v = v.max(-self.p_c[g]);
            v = v.max(self.group_power(g) - self.p_g_max[g]);
            for &p in &self.p_p[g] {
                v = v.max(-p).max(p - self.p_p_cap);
            }
        }
        v.max(self.p_g_max.iter().copied().sum::<T>() - self.p_total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport<T> {
    pub r_c: Vec<T>,
    pub r_p: Vec<Vec<T>>,
    pub r_sum_g: Vec<T>,
    pub r_total: T,
    /// Allocated transmit power, W.
    pub consumed: T,
    /// `R_total / (consumed + overhead)`, bits/s/Hz per W.
    pub ee: T,
}

impl<T: Real> RateReport<T> {
    /// Assembles a report from per-group rates and allocated power (W).
    pub fn assemble(r_c: Vec<T>, r_p: Vec<Vec<T>>, consumed: T, overhead: T) -> Self {
        let r_sum_g: Vec<T> = r_c.iter().zip(&r_p).map(|(&c, p)| c + p.iter().copied().sum::<T>()).collect();
        let r_total = r_sum_g.iter().copied().sum::<T>();
        let denom = consumed + overhead;
        let ee = if denom > T::zero() { r_total / denom } else { T::zero() };
        Self {
            r_c,
            r_p,
            r_sum_g,
            r_total,
            consumed,
            ee,
        }
    }

    /// Rate of each user (common share split evenly inside its group).
    pub fn user_rates(&self, groups: &[Vec<usize>], users: usize) -> Vec<T> {
        let mut out = vec![T::zero(); users];
        for (g, members) in groups.iter().enumerate() {
            let share = self.r_c[g] / T::from_usize_lossy(members.len().max(1));
            for (i, &k) in members.iter().enumerate() {
                out[k] = share + self.r_p[g][i];
            }
        }
        out
    }
}

pub fn network_sum_rate<T: Real>(alloc: &PowerAllocation<T>, state: &NetworkState<T>) -> RateReport<T> {
    let (r_c, r_p): (Vec<T>, Vec<Vec<T>>) = (0..state.group_count())
        .map(|g| state.group_rates(g, alloc.p_c[g], &alloc.p_p[g]))
        .unzip();
    RateReport::assemble(r_c, r_p, alloc.consumed() * state.power_unit, state.overhead)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(sigma_sq: f64) -> SinrInputs<f64> {
        SinrInputs::new(1.0, 1.0, sigma_sq)
    }

    #[test]
    fn constant_value() {
        assert!((capacity_constant::<f64>() - 0.058_549_831).abs() < 1e-8);
    }

    #[test]
    fn common_sinr_cases() {
        let inp = unit(0.01);
        assert_eq!(sinr_common(0.0, &[0.1, 0.1], &inp).unwrap(), 0.0);
        let c = inp.c;
        let g = sinr_common(1.0, &[0.1, 0.1], &inp).unwrap();
        assert!((g - c / (0.2 * c + 0.01)).abs() < 1e-12);
        assert!((g - 2.697).abs() < 1e-3, "{g}");
        let p = 0.01 / c;
        assert!((sinr_common(p, &[0.0, 0.0], &inp).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(sinr_common(1.0, &[], &unit(0.0)), Err(Error::NonPositiveNoise));
    }

    #[test]
    fn private_sinr_cases() {
        let inp = unit(0.01);
        let g = sinr_private(0, &[0.2, 0.1], &inp).unwrap();
        assert!((g - 0.7385).abs() < 1e-4, "{g}");
        let solo = sinr_private(0, &[0.3], &inp).unwrap();
        assert!((solo - inp.c * 0.3 / 0.01).abs() < 1e-12);
        let a = sinr_private(0, &[0.2, 0.2], &inp).unwrap();
        let b = sinr_private(1, &[0.2, 0.2], &inp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn toy_block_rate() {
        let h = Matrix::<f64>::identity(2);
        let r = Matrix::diag(&[2.0, 1.0]);
        let direct = log_det_rate(1.0, &h, &r).unwrap() / 3.0;
        assert!((direct - 3f64.log2() / 3.0).abs() < 1e-12);
        let sp = spectrum(&h, &r).unwrap();
        assert!((rate_from_spectrum(1.0 / 3.0, 1.0, &sp) - direct).abs() < 1e-12);
        assert_eq!(rate_from_spectrum(1.0 / 3.0, 0.0, &sp), 0.0);
        assert!((rate_from_spectrum(0.5f64, 3.0, &[1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn common_rate_uses_weakest_member() {
        let strong = [1.0, 2.0];
        let weak = [0.1, 0.2];
        let r = group_common_rate(0.5, 4.0, &[&strong[..], &weak[..]]);
        assert_eq!(r, rate_from_spectrum(0.5, 4.0, &weak));
        assert_eq!(group_common_rate::<f64>(0.5, 4.0, &[]), 0.0);
    }

    #[test]
    fn strongest_mode_is_dedicated() {
        let h = Matrix::from_rows(&[vec![0.1, 0.0], vec![0.0, 3.0], vec![0.2, 0.2]]);
        let sel = select_modes(&h, 2);
        assert_eq!(sel.len(), 2);
        assert_eq!(*sel.last().unwrap(), 1);
        assert_eq!(sel[0], 2);
    }
}
