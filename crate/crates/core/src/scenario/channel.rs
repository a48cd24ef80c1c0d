//! Line-of-sight channel gains between AP beam fans and user photodiodes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beam::beam_radius;
use super::{AccessPoint, PhotodiodeOrientation, Scenario, UserTerminal, VcselParams};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Maximum photodiode tilt used when resampling orientations.
const RESAMPLE_MAX_TILT_DEG: f64 = 80.0;

/// Irradiance (W/m²) at `target` from one VCSEL at `source` with unit beam axis `axis`,
/// carrying `power`. Zero behind the source.
pub fn beam_irradiance<T: Real>(vcsel: &VcselParams<T>, power: T, source: Vec3<T>, axis: Vec3<T>, target: Vec3<T>) -> T {
    let d = target - source;
    let axial = d.dot(axis);
    if !(axial > T::zero()) {
        return T::zero();
    }
    let r2 = (d.dot(d) - axial * axial).max(T::zero());
    let w = beam_radius(vcsel, axial);
    let w2 = w * w;
    T::lit(2.0) * power / (T::PI() * w2) * (-T::lit(2.0) * r2 / w2).exp()
}

/// Total irradiance at `target` from every VCSEL of `ap`, each at the configured `P_tr`.
pub fn ap_irradiance<T: Real>(ap: &AccessPoint<T>, target: Vec3<T>) -> T {
    ap.axes
        .iter()
        .map(|&a| beam_irradiance(&ap.vcsel, ap.vcsel.power, ap.position, a, target))
        .sum()
}

/// Collection factor `A_m G_m cos ψ · rect(ψ ≤ Ψ_F)` of a photodiode with normal `normal`
/// for light arriving from `source`.
pub fn collection<T: Real>(user: &UserTerminal<T>, normal: Vec3<T>, source: Vec3<T>) -> T {
    let to_src = match (source - user.position).normalized() {
        Some(v) => v,
        None => return T::zero(),
    };
    let cos_psi = normal.dot(to_src).min(T::one());
    if cos_psi <= T::zero() || cos_psi.acos() > user.fov {
        return T::zero();
    }
    user.pd_area * user.pd_gain * cos_psi
}

/// Received optical power (W) at photodiode `m` of `user` from the whole array of `ap`.
pub fn los_channel_gain<T: Real>(ap: &AccessPoint<T>, user: &UserTerminal<T>, m: usize) -> Result<T> {
    if (user.position - ap.position).norm() == T::zero() {
        return Err(Error::CoincidentTransceiver);
    }
    let normal = user.photodiodes[m].unit_normal();
    Ok(ap_irradiance(ap, user.position) * collection(user, normal, ap.position))
}

/// Gains per unit AP power (W/W) indexed `(k, m, l)`, with a per-link blockage mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTensor<T> {
    pub users: usize,
    pub pds: usize,
    pub aps: usize,
    pub gains: Vec<T>,
    pub blocked: Vec<bool>,
}

impl<T: Real> ChannelTensor<T> {
    pub fn zeros(users: usize, pds: usize, aps: usize) -> Self {
        Self {
            users,
            pds,
            aps,
            gains: vec![T::zero(); users * pds * aps],
            blocked: vec![false; users * aps],
        }
    }

    /// Builds a tensor from per-user `M × L` mode matrices.
    pub fn from_mode_matrices(modes: &[Matrix<T>]) -> Self {
        let (m, l) = modes.first().map_or((0, 0), |h| (h.rows(), h.cols()));
        let mut t = Self::zeros(modes.len(), m, l);
        for (k, h) in modes.iter().enumerate() {
            for i in 0..m {
                for j in 0..l {
                    t.set(k, i, j, h[(i, j)]);
                }
            }
        }
        t
    }

    fn idx(&self, k: usize, m: usize, l: usize) -> usize {
        (k * self.pds + m) * self.aps + l
    }

    pub fn gain(&self, k: usize, m: usize, l: usize) -> T {
        self.gains[self.idx(k, m, l)]
    }

    pub fn set(&mut self, k: usize, m: usize, l: usize, v: T) {
        let i = self.idx(k, m, l);
        self.gains[i] = v;
    }

    pub fn is_blocked(&self, k: usize, l: usize) -> bool {
        self.blocked[k * self.aps + l]
    }

    /// `M × L` matrix whose row `m` is the channel seen in receiver mode `m`.
    pub fn mode_matrix(&self, k: usize) -> Matrix<T> {
        Matrix::from_fn(self.pds, self.aps, |m, l| self.gain(k, m, l))
    }

    /// Largest gain from AP `l` to user `k` over all photodiodes.
    pub fn best_gain(&self, k: usize, l: usize) -> T {
        (0..self.pds).fold(T::zero(), |a, m| a.max(self.gain(k, m, l)))
    }

    /// Restriction to a subset of users, in the given order.
    pub fn select_users(&self, users: &[usize]) -> Self {
        let mut t = Self::zeros(users.len(), self.pds, self.aps);
        for (i, &k) in users.iter().enumerate() {
            for m in 0..self.pds {
                for l in 0..self.aps {
                    t.set(i, m, l, self.gain(k, m, l));
                }
            }
            for l in 0..self.aps {
                t.blocked[i * self.aps + l] = self.is_blocked(k, l);
            }
        }
        t
    }

    pub fn scale(&self, s: T) -> Self {
        let mut t = self.clone();
        t.gains.iter_mut().for_each(|g| *g = *g * s);
        t
    }
}

fn user_rows<T: Real>(scenario: &Scenario<T>, user: &UserTerminal<T>, irradiance: &[T]) -> Matrix<T> {
    Matrix::from_fn(user.photodiodes.len(), scenario.aps.len(), |m, l| {
        let ap = &scenario.aps[l];
        let n = user.photodiodes[m].unit_normal();
        irradiance[l] * collection(user, n, ap.position) / ap.total_power
    })
}

/// Evaluates the `(K, M, L)` tensor. Photodiodes are taken in order; one whose mode row
/// does not raise the rank of the rows kept so far is re-oriented at random (seeded per
/// user) until it does, within a per-user budget of `resample_attempts` draws. Accepted
/// orientations are written back into `scenario`.
pub fn build_channel_tensor<T: Real>(scenario: &mut Scenario<T>, seed: u64) -> Result<ChannelTensor<T>> {
    let l = scenario.aps.len();
    for u in &scenario.users {
        if scenario.aps.iter().any(|ap| (u.position - ap.position).norm() == T::zero()) {
            return Err(Error::CoincidentTransceiver);
        }
    }
    let attempts = scenario.config.receiver.resample_attempts;
    let sc = &*scenario;
    let solved: Vec<Result<(Vec<PhotodiodeOrientation<T>>, Matrix<T>)>> = sc
        .users
        .par_iter()
        .map(|user| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (user.id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            orient_user(sc, user, attempts, &mut rng).map(|pds| {
                let mut u = user.clone();
                u.photodiodes = pds;
                let h = user_rows(sc, &u, &sc.aps.iter().map(|ap| ap_irradiance(ap, u.position)).collect::<Vec<_>>());
                (u.photodiodes, h)
            })
        })
        .collect();
    let mut modes = Vec::with_capacity(solved.len());
    for (user, r) in scenario.users.iter_mut().zip(solved) {
        let (pds, h) = r?;
        user.photodiodes = pds;
        modes.push(h);
    }
    if modes.is_empty() {
        return Ok(ChannelTensor::zeros(0, scenario.config.receiver.photodiodes, l));
    }
    Ok(ChannelTensor::from_mode_matrices(&modes))
}

fn orient_user<T: Real>(
    sc: &Scenario<T>,
    user: &UserTerminal<T>,
    attempts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PhotodiodeOrientation<T>>> {
    let irr: Vec<T> = sc.aps.iter().map(|ap| ap_irradiance(ap, user.position)).collect();
    let l = sc.aps.len();
    let row = |o: &PhotodiodeOrientation<T>| -> Vec<T> {
        let n = o.unit_normal();
        sc.aps
            .iter()
            .zip(&irr)
            .map(|(ap, &i)| i * collection(user, n, ap.position) / ap.total_power)
            .collect()
    };
    let max_tilt = T::lit(RESAMPLE_MAX_TILT_DEG.to_radians());
    let mut pds = user.photodiodes.clone();
    let mut kept: Vec<Vec<T>> = Vec::with_capacity(l);
    let mut budget = attempts;
    for m in 0..pds.len() {
        if kept.len() == l {
            break;
        }
        loop {
            let mut trial = kept.clone();
            trial.push(row(&pds[m]));
            if Matrix::from_rows(&trial).rank(T::rank_tol()) == trial.len() {
                kept = trial;
                break;
            }
            if budget == 0 {
                return Err(Error::DegenerateReceiver { user: user.id, attempts });
            }
            budget -= 1;
            pds[m] = PhotodiodeOrientation::random(1, max_tilt, rng)[0];
        }
    }
    Ok(pds)
}

/// Gain per unit AP power of the reference link: AP 0 to an upward photodiode at the
/// beam spot of AP 0 closest to its nadir.
pub fn reference_gain<T: Real>(scenario: &Scenario<T>) -> Result<T> {
    let ap = scenario.aps.first().ok_or_else(|| Error::Noise("no access point".into()))?;
    let z = scenario.config.plane_z();
    let nadir = Vec3::new(ap.position.x, ap.position.y, z);
    let spot = ap
        .axes
        .iter()
        .map(|&a| {
            let t = (z - ap.position.z) / a.z;
            ap.position + a * t
        })
        .fold(None::<Vec3<T>>, |best, p| match best {
            Some(b) if (b - nadir).norm() <= (p - nadir).norm() => Some(b),
            _ => Some(p),
        })
        .unwrap_or(nadir);
    let rx = &scenario.config.receiver;
    let user = UserTerminal {
        id: usize::MAX,
        position: spot,
        photodiodes: vec![PhotodiodeOrientation {
            elevation: T::zero(),
            azimuth: T::zero(),
        }],
        pd_area: rx.area / T::from_usize_lossy(rx.photodiodes),
        pd_gain: rx.gain,
        fov: rx.fov,
        responsivity: rx.responsivity,
    };
    Ok(los_channel_gain(ap, &user, 0)? / ap.total_power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{FanCoverage, ScenarioConfig};

    fn nadir_config(m: usize, grid: [usize; 2]) -> ScenarioConfig<f64> {
        let mut cfg = ScenarioConfig::reference();
        cfg.vcsel.array_side = 1;
        cfg.coverage = FanCoverage::Nadir;
        cfg.ap_grid = grid;
        cfg.receiver.photodiodes = m;
        cfg
    }

    #[test]
    fn user_below_ap_facing_up() {
        let cfg = nadir_config(16, [1, 1]);
        let mut sc = Scenario::new(cfg, &[(4.0, 4.0)]);
        sc.users[0].photodiodes[0] = PhotodiodeOrientation {
            elevation: 0.0,
            azimuth: 0.0,
        };
        let h = los_channel_gain(&sc.aps[0], &sc.users[0], 0).unwrap();
        assert!((h - 2.352e-6).abs() < 2e-9, "{h}");
    }

    #[test]
    fn outside_fov_is_zero() {
        let cfg = nadir_config(16, [1, 1]);
        let mut sc = Scenario::new(cfg, &[(4.0, 4.0)]);
        let fov = sc.users[0].fov;
        sc.users[0].photodiodes[0].elevation = fov + 1e-9;
        assert_eq!(los_channel_gain(&sc.aps[0], &sc.users[0], 0).unwrap(), 0.0);
        sc.users[0].photodiodes[0].elevation = fov - 1e-6;
        assert!(los_channel_gain(&sc.aps[0], &sc.users[0], 0).unwrap() > 0.0);
    }

    #[test]
    fn coincident_positions_rejected() {
        let cfg = nadir_config(16, [1, 1]);
        let mut sc = Scenario::new(cfg, &[(4.0, 4.0)]);
        sc.users[0].position = sc.aps[0].position;
        assert_eq!(los_channel_gain(&sc.aps[0], &sc.users[0], 0), Err(Error::CoincidentTransceiver));
    }

    #[test]
    fn two_by_two_mode_matrix_full_rank() {
        let mut cfg = nadir_config(2, [2, 1]);
        cfg.coverage = FanCoverage::Room;
        cfg.vcsel.array_side = 8;
        let mut sc = Scenario::new(cfg, &[(3.0, 4.0)]);
        let t = build_channel_tensor(&mut sc, 7).unwrap();
        assert_eq!(t.mode_matrix(0).rank(1e-10), 2);
    }

    #[test]
    fn facing_away_is_degenerate() {
        let mut cfg = nadir_config(1, [1, 1]);
        cfg.receiver.resample_attempts = 0;
        let mut sc = Scenario::new(cfg, &[(4.0, 4.0)]);
        sc.users[0].photodiodes[0].elevation = std::f64::consts::PI;
        let err = build_channel_tensor(&mut sc, 1).unwrap_err();
        assert!(err.to_string().contains("degenerate receiver geometry"));
    }

    #[test]
    fn gain_decreases_with_radial_offset() {
        let cfg = nadir_config(1, [1, 1]);
        let mut last = f64::INFINITY;
        for i in 0..30 {
            let sc = Scenario::new(cfg.clone(), &[(4.0 + 0.01 * i as f64, 4.0)]);
            let mut u = sc.users[0].clone();
            u.photodiodes[0].elevation = 0.0;
            let h = los_channel_gain(&sc.aps[0], &u, 0).unwrap();
            assert!(h < last);
            last = h;
        }
    }
}
