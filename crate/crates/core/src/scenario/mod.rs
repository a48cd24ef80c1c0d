//! Physical scene: room, ceiling access points built from VCSEL arrays, users with
//! multi-photodiode receivers, line-of-sight channel gains, noise and eye safety.

pub mod beam;
pub mod blockage;
pub mod channel;
pub mod eye_safety;
pub mod noise;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::Vec3;
use crate::scalar::Real;

pub use beam::{beam_radius, rayleigh_range, vcsel_intensity};
pub use blockage::apply_blockage;
pub use channel::{build_channel_tensor, los_channel_gain, ChannelTensor};
pub use eye_safety::{exposure_level, max_permissible_power, EyeSafetyParams};
pub use noise::{db_to_linear, noise_variance, NoiseMode, NoiseModel, ReferenceLink};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig<T> {
    pub width: T,
    pub depth: T,
    pub height: T,
    /// Distance from the ceiling down to the receiving plane.
    pub plane_below_ceiling: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcselParams<T> {
    pub beam_waist: T,
    pub wavelength: T,
    pub refractive_index: T,
    /// Optical power of one VCSEL, `P_tr`.
    pub power: T,
    /// The AP is an `array_side × array_side` array.
    pub array_side: usize,
}

impl<T: Real> VcselParams<T> {
    pub fn count(&self) -> usize {
        self.array_side * self.array_side
    }
}

/// Where the VCSELs of one AP are aimed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FanCoverage<T> {
    /// Every VCSEL points straight down.
    Nadir,
    /// Aim points tile the whole receiving plane on an `L_v × L_v` grid.
    Room,
    /// Aim points tile a square of the given side centred below the AP.
    Square { side: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverParams<T> {
    /// Photodiodes per detector, `M`.
    pub photodiodes: usize,
    /// Whole detector area `A_rec`; each photodiode gets `A_rec / M`.
    pub area: T,
    pub gain: T,
    /// Field of view half-angle, radians.
    pub fov: T,
    pub responsivity: T,
    /// Tilt of the default photodiode fan from zenith, radians.
    pub tilt: T,
    /// Orientation resampling attempts when the mode matrix is rank deficient.
    pub resample_attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig<T> {
    pub room: RoomConfig<T>,
    /// AP grid as (columns along x, rows along y).
    pub ap_grid: [usize; 2],
    pub vcsel: VcselParams<T>,
    pub coverage: FanCoverage<T>,
    pub receiver: ReceiverParams<T>,
    pub users: usize,
    pub noise: NoiseModel<T>,
    pub eye_safety: EyeSafetyParams<T>,
    /// Electric-to-optical conversion factor `ρ`.
    pub electro_optic: T,
    /// DC bias current; removed before detection and never part of any rate.
    pub dc_bias: T,
}

impl<T: Real> ScenarioConfig<T> {
    /// 8 m × 8 m × 3 m room, 4 × 4 APs, 1550 nm VCSEL arrays, 20 users with 16 photodiodes.
    pub fn reference() -> Self {
        let l = T::lit;
        Self {
            room: RoomConfig {
                width: l(8.0),
                depth: l(8.0),
                height: l(3.0),
                plane_below_ceiling: l(2.0),
            },
            ap_grid: [4, 4],
            vcsel: VcselParams {
                beam_waist: l(8e-6),
                wavelength: l(1550e-9),
                refractive_index: l(1.0),
                power: l(0.06),
                array_side: 32,
            },
            coverage: FanCoverage::Room,
            receiver: ReceiverParams {
                photodiodes: 16,
                area: l(15e-6),
                gain: l(1.0),
                fov: l(60f64.to_radians()),
                responsivity: l(0.9),
                tilt: l(40f64.to_radians()),
                resample_attempts: 2000,
            },
            users: 20,
            noise: NoiseModel {
                mode: NoiseMode::SnrTarget { snr_db: l(30.0) },
                bandwidth: l(1.5e9),
                rin_db_per_hz: l(-155.0),
                thermal_variance: T::zero(),
            },
            eye_safety: EyeSafetyParams {
                cornea_diameter: l(7e-3),
                hazard_distance: l(0.2),
                mpe: l(1000.0),
                min_power: l(1e-3),
            },
            electro_optic: l(1.0),
            dc_bias: l(0.5),
        }
    }

    pub fn ap_count(&self) -> usize {
        self.ap_grid[0] * self.ap_grid[1]
    }

    /// Total optical power of one AP, `P_l = L_v² P_tr`.
    pub fn ap_power(&self) -> T {
        self.vcsel.power * T::from_usize_lossy(self.vcsel.count())
    }

    /// Height of the receiving plane above the floor.
    pub fn plane_z(&self) -> T {
        self.room.height - self.room.plane_below_ceiling
    }

    /// All violated invariants, each tagged with its config path.
    pub fn validate(&self) -> Vec<Error> {
        let mut errs = Vec::new();
        let z = T::zero();
        let mut need = |ok: bool, path: &str, msg: &str| {
            if !ok {
                errs.push(Error::config(path, msg));
            }
        };
        let r = &self.room;
        need(r.width > z && r.depth > z && r.height > z, "scenario.room", "dimensions must be > 0");
        need(
            r.plane_below_ceiling > z && r.plane_below_ceiling < r.height,
            "scenario.room.plane_below_ceiling",
            "receiving plane must lie strictly between ceiling and floor",
        );
        need(self.ap_count() >= 1, "scenario.ap_grid", "at least one AP required");
        let v = &self.vcsel;
        need(
            v.beam_waist > z && v.wavelength > z && v.power > z,
            "scenario.vcsel",
            "beam waist, wavelength and power must be > 0",
        );
        need(v.refractive_index >= T::one(), "scenario.vcsel.refractive_index", "must be >= 1");
        need(v.array_side >= 1, "scenario.vcsel.array_side", "must be >= 1");
        if let FanCoverage::Square { side } = self.coverage {
            need(side > z, "scenario.coverage.side", "must be > 0");
        }
        let rx = &self.receiver;
        need(rx.area > z, "scenario.receiver.area", "photodiode area must be > 0");
        need(rx.gain > z, "scenario.receiver.gain", "must be > 0");
        need(
            rx.fov > z && rx.fov <= T::FRAC_PI_2(),
            "scenario.receiver.fov",
            "must lie in (0, π/2]",
        );
        need(
            rx.photodiodes >= self.ap_count(),
            "scenario.receiver.photodiodes",
            "photodiodes per detector M must be at least the number of APs L",
        );
        need(self.users >= 1, "scenario.users", "at least one user required");
        need(self.electro_optic > z, "scenario.electro_optic", "must be > 0");
        need(self.noise.bandwidth > z, "scenario.noise.bandwidth", "must be > 0");
        let es = &self.eye_safety;
        need(
            es.cornea_diameter > z && es.hazard_distance > z && es.mpe > z,
            "scenario.eye_safety",
            "cornea diameter, hazard distance and MPE must be > 0",
        );
        if errs.is_empty() {
            let w = beam_radius(v, es.hazard_distance);
            match max_permissible_power(es, w) {
                Ok(p_max) => {
                    let per = self.ap_power() / T::from_usize_lossy(v.count());
                    if per > p_max || per < es.min_power {
                        errs.push(Error::config(
                            "scenario.vcsel.power",
                            format!(
                                "eye-safety bound violated: P_min {} <= P_l/L_v² = {} <= P_max {} does not hold",
                                es.min_power, per, p_max
                            ),
                        ));
                    }
                }
                Err(e) => errs.push(Error::config("scenario.eye_safety", e.to_string())),
            }
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotodiodeOrientation<T> {
    /// Angle from zenith.
    pub elevation: T,
    pub azimuth: T,
}

impl<T: Real> PhotodiodeOrientation<T> {
    pub fn unit_normal(&self) -> Vec3<T> {
        Vec3::from_angles(self.elevation, self.azimuth)
    }

    /// Default fan: alternating full and half tilt, azimuths spread uniformly.
    pub fn fan(m: usize, tilt: T) -> Vec<Self> {
        (0..m)
            .map(|i| {
                let elevation = if m == 1 {
                    T::zero()
                } else if i % 2 == 0 {
                    tilt
                } else {
                    tilt * T::lit(0.5)
                };
                Self {
                    elevation,
                    azimuth: T::TAU() * T::from_usize_lossy(i) / T::from_usize_lossy(m),
                }
            })
            .collect()
    }

    pub fn random<R: Rng + ?Sized>(m: usize, max_tilt: T, rng: &mut R) -> Vec<Self> {
        (0..m)
            .map(|_| Self {
                elevation: max_tilt * T::lit(rng.random::<f64>()),
                azimuth: T::TAU() * T::lit(rng.random::<f64>()),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint<T> {
    pub id: usize,
    pub position: Vec3<T>,
    pub vcsel: VcselParams<T>,
    pub total_power: T,
    /// Unit beam axis of every VCSEL in the array.
    pub axes: Vec<Vec3<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTerminal<T> {
    pub id: usize,
    pub position: Vec3<T>,
    pub photodiodes: Vec<PhotodiodeOrientation<T>>,
    /// Per-photodiode area `A_m`.
    pub pd_area: T,
    pub pd_gain: T,
    pub fov: T,
    pub responsivity: T,
}

/// A realised scene: APs with their beam fans and users with their detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub config: ScenarioConfig<T>,
    pub aps: Vec<AccessPoint<T>>,
    pub users: Vec<UserTerminal<T>>,
}

impl<T: Real> Scenario<T> {
    /// Builds APs from the config and places users at the given floor-plane points.
    pub fn new(config: ScenarioConfig<T>, positions: &[(T, T)]) -> Self {
        let aps = build_aps(&config);
        let z = config.plane_z();
        let rx = &config.receiver;
        let m = rx.photodiodes;
        let users = positions
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| UserTerminal {
                id,
                position: Vec3::new(x, y, z),
                photodiodes: PhotodiodeOrientation::fan(m, rx.tilt),
                pd_area: rx.area / T::from_usize_lossy(m),
                pd_gain: rx.gain,
                fov: rx.fov,
                responsivity: rx.responsivity,
            })
            .collect();
        Self { config, aps, users }
    }

    /// Users dropped uniformly at random on the receiving plane.
    pub fn random<R: Rng + ?Sized>(config: ScenarioConfig<T>, rng: &mut R) -> Self {
        let positions = random_positions(&config, config.users, rng);
        Self::new(config, &positions)
    }

    pub fn ap_count(&self) -> usize {
        self.aps.len()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn floor_positions(&self) -> Vec<(T, T)> {
        self.users.iter().map(|u| (u.position.x, u.position.y)).collect()
    }
}

pub fn random_positions<T: Real, R: Rng + ?Sized>(
    config: &ScenarioConfig<T>,
    count: usize,
    rng: &mut R,
) -> Vec<(T, T)> {
    (0..count)
        .map(|_| {
            let x = T::lit(rng.random::<f64>()) * config.room.width;
            let y = T::lit(rng.random::<f64>()) * config.room.depth;
            (x, y)
        })
        .collect()
}

fn build_aps<T: Real>(config: &ScenarioConfig<T>) -> Vec<AccessPoint<T>> {
    let [nx, ny] = config.ap_grid;
    let room = &config.room;
    let half = T::lit(0.5);
    let plane_z = config.plane_z();
    let side = config.vcsel.array_side;
    let mut aps = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let position = Vec3::new(
                room.width * (T::from_usize_lossy(ix) + half) / T::from_usize_lossy(nx),
                room.depth * (T::from_usize_lossy(iy) + half) / T::from_usize_lossy(ny),
                room.height,
            );
            let aims = aim_points(config.coverage, position, room, plane_z, side);
            let axes = aims
                .into_iter()
                .map(|p| (p - position).normalized().unwrap_or(Vec3::new(T::zero(), T::zero(), -T::one())))
                .collect();
            aps.push(AccessPoint {
                id: aps.len(),
                position,
                vcsel: config.vcsel.clone(),
                total_power: config.ap_power(),
                axes,
            });
        }
    }
    aps
}

fn aim_points<T: Real>(
    coverage: FanCoverage<T>,
    ap: Vec3<T>,
    room: &RoomConfig<T>,
    plane_z: T,
    side: usize,
) -> Vec<Vec3<T>> {
    let half = T::lit(0.5);
    let n = T::from_usize_lossy(side);
    let grid = |x0: T, y0: T, wx: T, wy: T| {
        let mut pts = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                pts.push(Vec3::new(
                    x0 + wx * (T::from_usize_lossy(i) + half) / n,
                    y0 + wy * (T::from_usize_lossy(j) + half) / n,
                    plane_z,
                ));
            }
        }
        pts
    };
    match coverage {
        FanCoverage::Nadir => vec![Vec3::new(ap.x, ap.y, plane_z); side * side],
        FanCoverage::Room => grid(T::zero(), T::zero(), room.width, room.depth),
        FanCoverage::Square { side: s } => grid(ap.x - s * half, ap.y - s * half, s, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid() {
        let cfg = ScenarioConfig::<f64>::reference();
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        assert_eq!(cfg.ap_count(), 16);
    }

    #[test]
    fn too_few_photodiodes_rejected() {
        let mut cfg = ScenarioConfig::<f64>::reference();
        cfg.receiver.photodiodes = 8;
        let errs = cfg.validate();
        assert!(errs.iter().any(|e| e.to_string().contains("at least the number of APs")));
    }

    #[test]
    fn unsafe_vcsel_power_rejected() {
        let mut cfg = ScenarioConfig::<f64>::reference();
        cfg.vcsel.power = 5.0;
        let errs = cfg.validate();
        assert!(errs.iter().any(|e| e.to_string().contains("eye-safety")), "{errs:?}");
    }

    #[test]
    fn photodiode_normals_are_unit() {
        for o in PhotodiodeOrientation::fan(16, 0.7f64) {
            assert!((o.unit_normal().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ap_layout_and_fans() {
        let cfg = ScenarioConfig::<f64>::reference();
        let sc = Scenario::new(cfg, &[(1.0, 1.0)]);
        assert_eq!(sc.aps.len(), 16);
        assert_eq!(sc.aps[0].position, Vec3::new(1.0, 1.0, 3.0));
        assert_eq!(sc.aps[5].position, Vec3::new(3.0, 3.0, 3.0));
        assert_eq!(sc.aps[0].axes.len(), 32 * 32);
        assert!(sc.aps[0].axes.iter().all(|a| a.z < 0.0));
        assert_eq!(sc.users[0].position.z, 1.0);
        assert!((sc.users[0].pd_area - 15e-6 / 16.0).abs() < 1e-18);
    }
}
