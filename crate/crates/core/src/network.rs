//! One channel drop in normalized units.
//!
//! Gains are divided by the reference-link gain `g_ref` and powers are measured in units
//! of one AP's optical power `P_l`, so a full-power AP seen through the reference link
//! has unit gain and the whole network budget is `L`. The noise variance is rescaled
//! to match: `σ̄² = σ_z² / (g_ref P_l)²`.

use serde::{Deserialize, Serialize};

use crate::bia::noise_multiplicities;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rates::{select_modes, spectrum, NetworkState, SinrInputs};
use crate::scalar::Real;
use crate::scenario::channel::reference_gain;
use crate::scenario::{apply_blockage, build_channel_tensor, db_to_linear, noise_variance, ChannelTensor, ReferenceLink, Scenario};

/// Fixed power draw charged in energy efficiency, W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overhead<T> {
    pub per_ap: T,
    pub per_user: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<T> {
    /// Normalized gains `H̄`.
    pub tensor: ChannelTensor<T>,
    pub positions: Vec<(T, T)>,
    /// Per user, the `L × L` block channel in the selected receiver modes.
    pub modes: Vec<Matrix<T>>,
    pub inputs: SinrInputs<T>,
    /// Watts per normalized power unit (`P_l`).
    pub power_unit: T,
    pub overhead: Overhead<T>,
}

impl<T: Real> Network<T> {
    /// Builds the channel of `scenario` (resampling receivers as needed) and normalizes it.
    /// `snr_db` overrides the configured noise target.
    pub fn from_scenario(scenario: &mut Scenario<T>, seed: u64, snr_db: Option<T>, overhead: Overhead<T>) -> Result<Self> {
        let tensor = build_channel_tensor(scenario, seed)?;
        let g_ref = reference_gain(scenario)?;
        if !(g_ref > T::zero()) {
            return Err(Error::Noise("reference link receives no power".into()));
        }
        let cfg = &scenario.config;
        let p_l = cfg.ap_power();
        let link = ReferenceLink {
            received_power: g_ref * p_l,
            responsivity: cfg.receiver.responsivity,
            electro_optic: cfg.electro_optic,
        };
        let sigma_z = noise_variance(&cfg.noise, Some(&link), snr_db)?;
        let norm = g_ref * p_l;
        let inputs = SinrInputs::new(cfg.electro_optic, cfg.receiver.responsivity, sigma_z / (norm * norm));
        Ok(Self::from_tensor(tensor.scale(T::one() / g_ref), scenario.floor_positions(), inputs, p_l, overhead))
    }

    /// Wraps an already normalized tensor.
    pub fn from_tensor(tensor: ChannelTensor<T>, positions: Vec<(T, T)>, inputs: SinrInputs<T>, power_unit: T, overhead: Overhead<T>) -> Self {
        let l = tensor.aps;
        let modes = (0..tensor.users)
            .map(|k| {
                let h = tensor.mode_matrix(k);
                let sel = select_modes(&h, l);
                Matrix::from_fn(sel.len(), l, |i, j| h[(sel[i], j)])
            })
            .collect();
        Self {
            tensor,
            positions,
            modes,
            inputs,
            power_unit,
            overhead,
        }
    }

    pub fn users(&self) -> usize {
        self.tensor.users
    }

    pub fn aps(&self) -> usize {
        self.tensor.aps
    }

    /// Network budget `P_T = L` in normalized units.
    pub fn p_total(&self) -> T {
        T::from_usize_lossy(self.aps())
    }

    pub fn overhead_watts(&self) -> T {
        self.overhead.per_ap * T::from_usize_lossy(self.aps()) + self.overhead.per_user * T::from_usize_lossy(self.users())
    }

    /// Normalized noise variance that puts the reference link at `snr_db`.
    pub fn sigma_sq_at_snr(&self, snr_db: T) -> T {
        let rz = self.inputs.rho * self.inputs.zeta;
        rz * rz / db_to_linear(snr_db)
    }

    pub fn with_sigma_sq(&self, sigma_sq: T) -> Self {
        let mut n = self.clone();
        n.inputs.sigma_sq = sigma_sq;
        n
    }

    pub fn with_blockage(&self, p_b: f64, seed: u64) -> Self {
        let t = apply_blockage(&self.tensor, p_b, seed);
        Self::from_tensor(t, self.positions.clone(), self.inputs, self.power_unit, self.overhead)
    }

    pub fn select_users(&self, users: &[usize]) -> Self {
        let t = self.tensor.select_users(users);
        let positions = users.iter().map(|&k| self.positions[k]).collect();
        Self::from_tensor(t, positions, self.inputs, self.power_unit, self.overhead)
    }

    /// Time fraction per alignment block for `groups` groups over this network's APs.
    pub fn block_fraction(&self, groups: usize) -> T {
        if self.aps() < 2 {
            T::one()
        } else {
            T::one() / T::from_usize_lossy(groups + self.aps() - 1)
        }
    }

    /// Rate state of the aligned scheme for a given partition of the users.
    pub fn aligned_state(&self, groups: &[Vec<usize>]) -> Result<NetworkState<T>> {
        let g = groups.len();
        let l = self.aps();
        let mult = if l < 2 { vec![T::one()] } else { noise_multiplicities(l, g) };
        let r = Matrix::diag(&mult);
        let spectra = self
            .modes
            .iter()
            .map(|h| spectrum(h, &r))
            .collect::<Result<Vec<_>>>()?;
        Ok(NetworkState {
            groups: groups.to_vec(),
            spectra,
            b: self.block_fraction(g),
            inputs: self.inputs,
            p_total: self.p_total(),
            power_unit: self.power_unit,
            overhead: self.overhead_watts(),
            noise_scale: Vec::new(),
        })
    }
}
