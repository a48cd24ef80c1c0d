//! Max-min fractional power allocation for the aligned rate-splitting scheme.
//!
//! Each group `g` has a rate-to-power ratio `R_g / (P_g + P_0)`, where `P_g` is the
//! power it is allocated and `P_0` its share of fixed circuit power. The solver
//! maximizes the smallest ratio subject to the group budgets, the per-message private
//! cap and a per-group rate floor. Dinkelbach's parameter `δ` (smallest ratio) turns the
//! fraction into `min_g {R_g − Υ_g}` with `Υ_g = δ (P_g + P_0)`, and the max-min is
//! dualized with multipliers `λ` (max-min), `ξ` (rate floor), `ν` (group budget) and
//! `β` (private cap). Powers come from per-coordinate stationarity of the group
//! Lagrangian; multipliers follow projected-gradient steps with diminishing step sizes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{network_sum_rate, rate_slope, NetworkState, PowerAllocation, RateReport};
use crate::scalar::Real;

/// Per-group minimum sum rate `R_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum QosTarget<T> {
    /// No floor.
    None,
    /// A fraction of the best rate the group can reach on its full budget, and never
    /// less than the rate of the uniform starting split.
    Fraction { fraction: T },
    /// Absolute floors in bits/s/Hz, one per group.
    Absolute { rates: Vec<T> },
}

/// How the private powers enter the stationarity conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Exact gradient of the group sum rate at the current iterate.
    Full,
    /// The other private messages are held at the cap `P_p^T` when solving for a
    /// private power, and all of them when solving for the common power.
    FixedPrivate,
}

/// Which multipliers are iterated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `λ`, `ξ`, `ν`, `β` with Dinkelbach updates of `δ`.
    Full,
    /// Only `β` and `ν`; `λ = 1/G`, `ξ = 0` and `δ` frozen at its starting value.
    BetaNu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig<T> {
    /// Outer iterations `T`.
    pub iterations: usize,
    /// Coordinate sweeps per group per outer iteration.
    pub inner_sweeps: usize,
    pub step_lambda: T,
    pub step_xi: T,
    /// Defaults to `0.01 P_T`.
    pub step_beta: Option<T>,
    /// Defaults to `0.01 P_T`.
    pub step_nu: Option<T>,
    pub initial_multiplier: T,
    /// Stop once `|f(Υ)|` and the largest power change both fall below these.
    pub tol_f: T,
    pub tol_power: T,
    pub qos: QosTarget<T>,
    /// Common share of each group budget at the starting point.
    pub common_fraction: T,
    /// `P_p^T` as a fraction of the group budget.
    pub private_cap_fraction: T,
    /// Fixed power per group in the ratio; defaults to an equal share of the network
    /// overhead.
    pub circuit_power: Option<T>,
    pub coupling: Coupling,
    pub variant: Variant,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            iterations: 60,
            inner_sweeps: 3,
            step_lambda: T::lit(0.1),
            step_xi: T::lit(0.1),
            step_beta: None,
            step_nu: None,
            initial_multiplier: T::lit(0.1),
            tol_f: T::lit(1e-9),
            tol_power: T::lit(1e-9),
            qos: QosTarget::Fraction { fraction: T::lit(0.999) },
            common_fraction: T::lit(0.5),
            private_cap_fraction: T::one(),
            circuit_power: None,
            coupling: Coupling::Full,
            variant: Variant::Full,
        }
    }
}

impl<T: Real> OptimizerConfig<T> {
    /// All violated invariants, each tagged with its config path.
    pub fn validate(&self) -> Vec<Error> {
        let mut errs = Vec::new();
        let z = T::zero();
        let mut need = |ok: bool, path: &str, msg: &str| {
            if !ok {
                errs.push(Error::config(format!("optimizer.{path}"), msg));
            }
        };
        need(self.iterations >= 1, "iterations", "at least one iteration required");
        need(self.inner_sweeps >= 1, "inner_sweeps", "at least one sweep required");
        need(self.step_lambda > z && self.step_xi > z, "step_lambda", "multiplier steps must be > 0");
        need(self.step_beta.is_none_or(|s| s > z), "step_beta", "must be > 0");
        need(self.step_nu.is_none_or(|s| s > z), "step_nu", "must be > 0");
        need(self.initial_multiplier >= z, "initial_multiplier", "must be >= 0");
        need(self.tol_f >= z && self.tol_power >= z, "tol_f", "tolerances must be >= 0");
        need(
            self.common_fraction >= z && self.common_fraction <= T::one(),
            "common_fraction",
            "must lie in [0, 1]",
        );
        need(
            self.private_cap_fraction > z && self.private_cap_fraction <= T::one(),
            "private_cap_fraction",
            "must lie in (0, 1]",
        );
        need(self.circuit_power.is_none_or(|p| p >= z), "circuit_power", "must be >= 0");
        match &self.qos {
            QosTarget::Fraction { fraction } => need(*fraction >= z && *fraction <= T::one(), "qos.fraction", "must lie in [0, 1]"),
            QosTarget::Absolute { rates } => need(rates.iter().all(|&r| r >= z), "qos.rates", "rates must be >= 0"),
            QosTarget::None => {}
        }
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers<T> {
    pub lambda: Vec<T>,
    pub xi: Vec<T>,
    pub nu: Vec<T>,
    pub beta: Vec<Vec<T>>,
}

impl<T: Real> Multipliers<T> {
    pub fn uniform(sizes: &[usize], v: T) -> Self {
        let g = sizes.len();
        Self {
            lambda: vec![v; g],
            xi: vec![v; g],
            nu: vec![v; g],
            beta: sizes.iter().map(|&k| vec![v; k]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub delta: T,
    pub upsilon: Vec<T>,
    pub f: T,
    pub r_sum: Vec<T>,
    pub r_total: T,
    pub power_residual: T,
    pub qos_residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution<T> {
    pub alloc: PowerAllocation<T>,
    pub upsilon: Vec<T>,
    pub delta: T,
    /// `min_g (R_g − Υ_g)` at the returned allocation.
    pub f: T,
    pub report: RateReport<T>,
    pub r_min: Vec<T>,
    pub circuit_power: T,
    pub multipliers: Multipliers<T>,
    pub trace: Vec<TraceRow<T>>,
    /// One-dimensional stationarity solves performed.
    pub operations: u64,
}

/// Budget of each group and the private cap for a state.
pub fn budgets<T: Real>(state: &NetworkState<T>, cfg: &OptimizerConfig<T>) -> (Vec<T>, T) {
    let g = state.group_count().max(1);
    let p_g = state.p_total / T::from_usize_lossy(g);
    (vec![p_g; state.group_count()], p_g * cfg.private_cap_fraction)
}

/// Uniform split: `P_g = P_T/G`, a fixed common share, the rest equally to privates
/// (capped at `P_p^T`).
pub fn uniform_allocation<T: Real>(state: &NetworkState<T>, common_fraction: T, private_cap_fraction: T) -> PowerAllocation<T> {
    let g = state.group_count();
    let p_g = state.p_total / T::from_usize_lossy(g.max(1));
    let cap = p_g * private_cap_fraction;
    let p_c: Vec<T> = vec![p_g * common_fraction; g];
    let p_p = state
        .groups
        .iter()
        .map(|m| {
            let each = (p_g - p_g * common_fraction) / T::from_usize_lossy(m.len().max(1));
            vec![each.min(cap); m.len()]
        })
        .collect();
    PowerAllocation {
        p_c,
        p_p,
        p_g_max: vec![p_g; g],
        p_p_cap: cap,
        p_total: state.p_total,
    }
}

struct Partials<T> {
    common: T,
    private: Vec<T>,
}

/// Gradient of `R_g` with respect to `P_c` and each `P_p`.
fn gradient<T: Real>(state: &NetworkState<T>, g: usize, p_c: T, p: &[T]) -> Partials<T> {
    let inp = &state.inputs;
    let a = inp.gain();
    let (ac, ap) = (a * inp.wc_sq, a * inp.wp_sq);
    let b = state.b;
    let members = &state.groups[g];
    let noise: Vec<T> = members.iter().map(|&k| state.user_inputs(k).sigma_sq).collect();
    let sp = state.member_spectra(g);
    let total: T = p.iter().copied().sum();
    let den_c: Vec<T> = noise.iter().map(|&s| ap * total + s).collect();
    let rate_c = |i: usize| crate::rates::rate_from_spectrum(b, ac * p_c / den_c[i], sp[i]);
    let weakest = (0..sp.len())
        .min_by(|&i, &j| rate_c(i).partial_cmp(&rate_c(j)).unwrap())
        .unwrap_or(0);
    let (slope_c, dc) = if sp.is_empty() {
        (T::zero(), T::one())
    } else {
        (rate_slope(b, ac * p_c / den_c[weakest], sp[weakest]), den_c[weakest])
    };
    let common = slope_c * ac / dc;
    let d_gc_dp = -ac * p_c * ap / (dc * dc);
    let dens: Vec<T> = (0..p.len()).map(|k| ap * (total - p[k]) + noise[k]).collect();
    let slopes: Vec<T> = (0..p.len()).map(|k| rate_slope(b, ap * p[k] / dens[k], sp[k])).collect();
    let private = (0..p.len())
        .map(|j| {
            let mut d = slope_c * d_gc_dp + slopes[j] * ap / dens[j];
            for k in (0..p.len()).filter(|&k| k != j) {
                d = d - slopes[k] * ap * p[k] * ap / (dens[k] * dens[k]);
            }
            d
        })
        .collect();
    Partials { common, private }
}

/// Maximizes `φ` on `[lo, hi]` given its derivative: bisection on a sign change of
/// `dφ`, compared against both end points.
fn maximize_1d<T: Real>(phi: impl Fn(T) -> T, dphi: impl Fn(T) -> T, lo: T, hi: T) -> T {
    if !(hi > lo) {
        return lo;
    }
    let d_lo = dphi(lo);
    let d_hi = dphi(hi);
    let mut cands = vec![lo, hi];
    if d_lo > T::zero() && d_hi < T::zero() {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = (a + b) * T::lit(0.5);
            if m <= a || m >= b {
                break;
            }
            if dphi(m) > T::zero() {
                a = m;
            } else {
                b = m;
            }
        }
        cands.push((a + b) * T::lit(0.5));
    }
    cands
        .into_iter()
        .map(|x| (phi(x), x))
        .fold((T::neg_infinity(), lo), |best, c| if c.0 > best.0 { c } else { best })
        .1
}

/// Stationary power of a scalar concave rate `b log₂(1 + a P)` under weight `w` and
/// price `π`: `P* = w b / (π ln 2) − 1/a`, clipped to `[0, cap]`.
pub fn scalar_stationary_power<T: Real>(b: T, a: T, weight: T, price: T, cap: T) -> T {
    if !(price > T::zero()) {
        return cap;
    }
    (weight * b / (price * T::LN_2()) - T::one() / a).max(T::zero()).min(cap)
}

/// Step context shared by every group in one outer iteration.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<T> {
    pub delta: T,
    pub p_max: T,
    pub cap: T,
    pub eps_beta: T,
    pub eps_nu: T,
    pub sweeps: usize,
    pub coupling: Coupling,
}

/// Per-group multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMultipliers<T> {
    pub lambda: T,
    pub xi: T,
    pub nu: T,
    pub beta: Vec<T>,
}

/// Stationary powers of group `g` for fixed `λ_g, ξ_g`, followed by projected steps on
/// `β` and `ν`. Returns the number of one-dimensional solves.
pub fn inner_lagrangian_step<T: Real>(
    state: &NetworkState<T>,
    g: usize,
    m: &mut GroupMultipliers<T>,
    p_c: &mut T,
    p: &mut [T],
    ctx: &StepContext<T>,
) -> u64 {
    let w = m.lambda + m.xi;
    let price = ctx.delta * m.lambda + m.nu;
    let mut ops = 0u64;
    for _ in 0..ctx.sweeps {
        let fixed: Vec<T> = vec![ctx.cap; p.len()];
        let room_c = (ctx.p_max - p.iter().copied().sum::<T>()).max(T::zero());
        let p_snapshot = p.to_vec();
        *p_c = {
            let interf: &[T] = match ctx.coupling {
                Coupling::Full => &p_snapshot,
                Coupling::FixedPrivate => &fixed,
            };
            let phi = |x: T| w * state.group_sum_rate(g, x, interf) - price * x;
            let dphi = |x: T| w * gradient(state, g, x, interf).common - price;
            maximize_1d(phi, dphi, T::zero(), room_c)
        };
        ops += 1;
        for k in 0..p.len() {
            let others: T = p.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &v)| v).sum();
            let hi = ctx.cap.min((ctx.p_max - *p_c - others).max(T::zero()));
            let pk_price = price + m.beta[k];
            let mut trial = match ctx.coupling {
                Coupling::Full => p.to_vec(),
                Coupling::FixedPrivate => vec![ctx.cap; p.len()],
            };
            let c = *p_c;
            let phi = |x: T| {
                let mut t = trial.clone();
                t[k] = x;
                let r = match ctx.coupling {
                    Coupling::Full => state.group_sum_rate(g, c, &t),
                    Coupling::FixedPrivate => state.group_rates(g, c, &t).1[k],
                };
                w * r - pk_price * x
            };
            let dphi = |x: T| {
                let mut t = trial.clone();
                t[k] = x;
                let d = match ctx.coupling {
                    Coupling::Full => gradient(state, g, c, &t).private[k],
                    Coupling::FixedPrivate => private_own_slope(state, g, &t, k),
                };
                w * d - pk_price
            };
            p[k] = maximize_1d(phi, dphi, T::zero(), hi);
            trial[k] = p[k];
            ops += 1;
        }
        for k in 0..p.len() {
            m.beta[k] = (m.beta[k] - ctx.eps_beta * (ctx.cap - p[k])).max(T::zero());
        }
        let used = *p_c + p.iter().copied().sum::<T>();
        m.nu = (m.nu - ctx.eps_nu * (ctx.p_max - used)).max(T::zero());
    }
    ops
}

fn private_own_slope<T: Real>(state: &NetworkState<T>, g: usize, p: &[T], k: usize) -> T {
    let inp = &state.inputs;
    let ap = inp.gain() * inp.wp_sq;
    let others: T = p.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &v)| v).sum();
    let den = ap * others + state.user_inputs(state.groups[g][k]).sigma_sq;
    let sp = state.member_spectra(g);
    rate_slope(state.b, ap * p[k] / den, sp[k]) * ap / den
}

/// Projected steps on `λ` (toward the groups attaining `Γ = min_g (R_g − Υ_g)`) and
/// `ξ` (rate floors). `λ` is renormalized to sum to one; ties at `Γ` share equally.
pub fn outer_multiplier_step<T: Real>(lambda: &mut [T], xi: &mut [T], residual: &[T], r_sum: &[T], r_min: &[T], eps_lambda: T, eps_xi: T) {
    let gamma = residual.iter().copied().fold(T::infinity(), T::min);
    for g in 0..lambda.len() {
        lambda[g] = (lambda[g] - eps_lambda * (residual[g] - gamma)).max(T::zero());
        xi[g] = (xi[g] - eps_xi * (r_sum[g] - r_min[g])).max(T::zero());
    }
    let total: T = lambda.iter().copied().sum();
    if total > T::zero() {
        lambda.iter_mut().for_each(|l| *l = *l / total);
    } else {
        let tol = T::epsilon().sqrt() * (T::one() + gamma.abs());
        let ties: Vec<usize> = (0..lambda.len()).filter(|&g| residual[g] - gamma <= tol).collect();
        let share = T::one() / T::from_usize_lossy(ties.len());
        for &g in &ties {
            lambda[g] = share;
        }
    }
}

/// `min_g (R_g − Υ_g)`.
pub fn parametric_value<T: Real>(state: &NetworkState<T>, alloc: &PowerAllocation<T>, upsilon: &[T]) -> T {
    (0..state.group_count())
        .map(|g| state.group_sum_rate(g, alloc.p_c[g], &alloc.p_p[g]) - upsilon[g])
        .fold(T::infinity(), T::min)
}

/// Highest sum rate group `g` can reach with budget `p_max` and private cap `cap`,
/// with the maximizing `(P_c, P_p)`. Coordinate ascent from several starts, with the
/// budget always exhausted through the common message.
pub fn max_group_rate<T: Real>(state: &NetworkState<T>, g: usize, p_max: T, cap: T) -> (T, T, Vec<T>) {
    let k = state.groups[g].len();
    let rate = |p: &[T]| {
        let used: T = p.iter().copied().sum();
        state.group_sum_rate(g, (p_max - used).max(T::zero()), p)
    };
    let kf = T::from_usize_lossy(k.max(1));
    let starts: Vec<Vec<T>> = vec![
        vec![T::zero(); k],
        vec![(p_max * T::lit(0.5) / kf).min(cap); k],
        vec![(p_max / kf).min(cap); k],
    ];
    let mut best = (T::neg_infinity(), Vec::new());
    for mut p in starts {
        for _ in 0..50 {
            let before = rate(&p);
            for j in 0..k {
                let others: T = p.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &v)| v).sum();
                let hi = cap.min((p_max - others).max(T::zero()));
                p[j] = golden_max(
                    |x| {
                        let mut t = p.clone();
                        t[j] = x;
                        rate(&t)
                    },
                    T::zero(),
                    hi,
                );
            }
            if rate(&p) - before <= T::lit(1e-13) * (T::one() + before.abs()) {
                break;
            }
        }
        let r = rate(&p);
        if r > best.0 {
            best = (r, p);
        }
    }
    let used: T = best.1.iter().copied().sum();
    (best.0, (p_max - used).max(T::zero()), best.1)
}

/// Maximum of `f` on `[lo, hi]`: coarse scan, then golden-section refinement around the
/// best scan point.
fn golden_max<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T) -> T {
    if !(hi > lo) {
        return lo;
    }
    let n = 24;
    let step = (hi - lo) / T::from_usize_lossy(n);
    let (mut bi, mut bv) = (0, T::neg_infinity());
    for i in 0..=n {
        let v = f(lo + step * T::from_usize_lossy(i));
        if v > bv {
            bv = v;
            bi = i;
        }
    }
    let mut a = (lo + step * T::from_usize_lossy(bi.saturating_sub(1))).max(lo);
    let mut b = (lo + step * T::from_usize_lossy(bi + 1)).min(hi);
    let r = T::lit(0.618_033_988_749_894_9);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) * T::lit(0.5);
    [lo, hi, mid, lo + step * T::from_usize_lossy(bi)]
        .into_iter()
        .map(|x| (f(x), x))
        .fold((T::neg_infinity(), lo), |best, c| if c.0 > best.0 { c } else { best })
        .1
}

/// Rate floors implied by the QoS target; errors when a floor is out of reach.
pub fn rate_floors<T: Real>(state: &NetworkState<T>, cfg: &OptimizerConfig<T>) -> Result<Vec<T>> {
    let (p_g, cap) = budgets(state, cfg);
    let g = state.group_count();
    match &cfg.qos {
        QosTarget::None => Ok(vec![T::zero(); g]),
        QosTarget::Fraction { fraction } => {
            let uni = uniform_allocation(state, cfg.common_fraction, cfg.private_cap_fraction);
            Ok((0..g)
                .map(|i| {
                    let base = state.group_sum_rate(i, uni.p_c[i], &uni.p_p[i]);
                    (max_group_rate(state, i, p_g[i], cap).0 * *fraction).max(base)
                })
                .collect())
        }
        QosTarget::Absolute { rates } => {
            if rates.len() != g {
                return Err(Error::config("optimizer.qos.rates", format!("expected {g} entries, got {}", rates.len())));
            }
            for (i, &r) in rates.iter().enumerate() {
                let best = max_group_rate(state, i, p_g[i], cap).0;
                if r > best {
                    return Err(Error::InfeasibleQos {
                        group: i,
                        required: r.to_f64_lossy(),
                        achievable: best.to_f64_lossy(),
                    });
                }
            }
            Ok(rates.clone())
        }
    }
}

fn ratio<T: Real>(r: T, p: T, p0: T) -> T {
    let d = p + p0;
    if d > T::zero() {
        r / d
    } else {
        T::zero()
    }
}

/// Moves group `g` along the ray through its allocation to the best ratio that keeps the
/// rate floor and the power caps.
fn ray_polish<T: Real>(state: &NetworkState<T>, g: usize, p_c: &mut T, p: &mut [T], p_max: T, cap: T, r_min: T, p0: T) {
    let used = *p_c + p.iter().copied().sum::<T>();
    if !(used > T::zero()) {
        return;
    }
    let pmax_k = p.iter().copied().fold(T::zero(), T::max);
    let mut t_hi = p_max / used;
    if pmax_k > T::zero() {
        t_hi = t_hi.min(cap / pmax_k);
    }
    let (c0, p0v) = (*p_c, p.to_vec());
    let at = |t: T| {
        let pp: Vec<T> = p0v.iter().map(|&x| x * t).collect();
        state.group_sum_rate(g, c0 * t, &pp)
    };
    if at(t_hi) < r_min {
        return;
    }
    let mut t_lo = T::zero();
    if r_min > T::zero() {
        let (mut a, mut b) = (T::zero(), t_hi);
        for _ in 0..200 {
            let m = (a + b) * T::lit(0.5);
            if at(m) >= r_min {
                b = m;
            } else {
                a = m;
            }
        }
        t_lo = b;
    }
    let t = golden_max(|t| ratio(at(t), t * used, p0), t_lo, t_hi);
    *p_c = c0 * t;
    for (x, &v) in p.iter_mut().zip(&p0v) {
        *x = (v * t).min(cap);
    }
}

struct Iterate<T> {
    alloc: PowerAllocation<T>,
    r_sum: Vec<T>,
}

fn evaluate<T: Real>(state: &NetworkState<T>, alloc: &PowerAllocation<T>) -> Iterate<T> {
    let r_sum = (0..state.group_count()).map(|g| state.group_sum_rate(g, alloc.p_c[g], &alloc.p_p[g])).collect();
    Iterate { alloc: alloc.clone(), r_sum }
}

fn min_ratio<T: Real>(it: &Iterate<T>, p0: T) -> T {
    (0..it.r_sum.len())
        .map(|g| ratio(it.r_sum[g], it.alloc.group_power(g), p0))
        .fold(T::infinity(), T::min)
}

fn qos_gap<T: Real>(it: &Iterate<T>, r_min: &[T]) -> T {
    it.r_sum.iter().zip(r_min).map(|(&r, &m)| (m - r).max(T::zero())).fold(T::zero(), T::max)
}

/// Solves the max-min fractional program from the uniform starting point.
pub fn solve_max_min<T: Real>(state: &NetworkState<T>, cfg: &OptimizerConfig<T>) -> Result<Solution<T>> {
    let g_count = state.group_count();
    if g_count == 0 {
        return Err(Error::config("grouping", "no groups to allocate"));
    }
    let (p_g, cap) = budgets(state, cfg);
    let r_min = rate_floors(state, cfg)?;
    let p0 = cfg
        .circuit_power
        .unwrap_or_else(|| state.overhead / (state.power_unit * T::from_usize_lossy(g_count)));
    let eps_beta = cfg.step_beta.unwrap_or(state.p_total * T::lit(0.01));
    let eps_nu = cfg.step_nu.unwrap_or(state.p_total * T::lit(0.01));
    let sizes: Vec<usize> = state.groups.iter().map(Vec::len).collect();

    let mut alloc = uniform_allocation(state, cfg.common_fraction, cfg.private_cap_fraction);
    let mut mult = Multipliers::uniform(&sizes, cfg.initial_multiplier);
    if cfg.variant == Variant::BetaNu {
        mult.lambda = vec![T::one() / T::from_usize_lossy(g_count); g_count];
        mult.xi = vec![T::zero(); g_count];
    }
    let start = evaluate(state, &alloc);
    let mut delta = min_ratio(&start, p0);
    let mut trace = vec![trace_row(0, state, &start, delta, p0, &r_min, None)];
    let mut best = start;
    let mut ops = 0u64;

    for t in 1..=cfg.iterations {
        let scale = T::one() / T::from_usize_lossy(t).sqrt();
        let ctx = StepContext {
            delta,
            p_max: p_g[0],
            cap,
            eps_beta: eps_beta * scale,
            eps_nu: eps_nu * scale,
            sweeps: cfg.inner_sweeps,
            coupling: cfg.coupling,
        };
        let prev = alloc.clone();
        let results: Vec<(T, Vec<T>, GroupMultipliers<T>, u64)> = (0..g_count)
            .into_par_iter()
            .map(|g| {
                let mut gm = GroupMultipliers {
                    lambda: mult.lambda[g],
                    xi: mult.xi[g],
                    nu: mult.nu[g],
                    beta: mult.beta[g].clone(),
                };
                let mut pc = alloc.p_c[g];
                let mut pp = alloc.p_p[g].clone();
                let n = inner_lagrangian_step(state, g, &mut gm, &mut pc, &mut pp, &ctx);
                (pc, pp, gm, n)
            })
            .collect();
        for (g, (pc, pp, gm, n)) in results.into_iter().enumerate() {
            alloc.p_c[g] = pc;
            alloc.p_p[g] = pp;
            mult.nu[g] = gm.nu;
            mult.beta[g] = gm.beta;
            ops += n;
        }
        let it = evaluate(state, &alloc);
        let upsilon: Vec<T> = (0..g_count).map(|g| delta * (alloc.group_power(g) + p0)).collect();
        let residual: Vec<T> = (0..g_count).map(|g| it.r_sum[g] - upsilon[g]).collect();
        if cfg.variant == Variant::Full {
            outer_multiplier_step(
                &mut mult.lambda,
                &mut mult.xi,
                &residual,
                &it.r_sum,
                &r_min,
                cfg.step_lambda * scale,
                cfg.step_xi * scale,
            );
        }
        let f_prev = residual.iter().copied().fold(T::infinity(), T::min);
        if cfg.variant == Variant::Full {
            delta = min_ratio(&it, p0);
        }
        trace.push(trace_row(t, state, &it, delta, p0, &r_min, Some(f_prev)));
        if better(&it, &best, p0, &r_min) {
            best = it;
        }
        let moved = (0..g_count)
            .map(|g| {
                let dc = (alloc.p_c[g] - prev.p_c[g]).abs();
                alloc.p_p[g].iter().zip(&prev.p_p[g]).fold(dc, |m, (&a, &b)| m.max((a - b).abs()))
            })
            .fold(T::zero(), T::max);
        if f_prev.abs() <= cfg.tol_f && moved <= cfg.tol_power {
            break;
        }
    }

    if cfg.variant == Variant::Full {
        best = finalize(state, best, &p_g, cap, &r_min, p0);
    }
    let final_delta = if cfg.variant == Variant::Full { min_ratio(&best, p0) } else { delta };
    let upsilon: Vec<T> = (0..g_count).map(|g| final_delta * (best.alloc.group_power(g) + p0)).collect();
    let f = parametric_value(state, &best.alloc, &upsilon);
    let report = network_sum_rate(&best.alloc, state);
    Ok(Solution {
        alloc: best.alloc,
        upsilon,
        delta: final_delta,
        f,
        report,
        r_min,
        circuit_power: p0,
        multipliers: mult,
        trace,
        operations: ops,
    })
}

/// Per group, the better of the ray-polished iterate and the ray-polished max-rate
/// allocation: floors met first, then the larger ratio.
fn finalize<T: Real>(state: &NetworkState<T>, it: Iterate<T>, p_g: &[T], cap: T, r_min: &[T], p0: T) -> Iterate<T> {
    let mut alloc = it.alloc;
    for g in 0..state.group_count() {
        let (_, mc, mp) = max_group_rate(state, g, p_g[g], cap);
        let mut cands = vec![(alloc.p_c[g], alloc.p_p[g].clone()), (mc, mp)];
        for (c, p) in cands.iter_mut() {
            ray_polish(state, g, c, p, p_g[g], cap, r_min[g], p0);
        }
        let tol = T::lit(1e-9);
        let score = |c: T, p: &[T]| {
            let r = state.group_sum_rate(g, c, p);
            let used = c + p.iter().copied().sum::<T>();
            (r >= r_min[g] - tol, ratio(r, used, p0))
        };
        let (c, p) = cands
            .into_iter()
            .map(|(c, p)| (score(c, &p), c, p))
            .fold(None::<((bool, T), T, Vec<T>)>, |acc, x| match acc {
                Some(a) if a.0 .0 && !x.0 .0 => Some(a),
                Some(a) if a.0 .0 == x.0 .0 && a.0 .1 >= x.0 .1 => Some(a),
                _ => Some(x),
            })
            .map(|(_, c, p)| (c, p))
            .unwrap();
        alloc.p_c[g] = c;
        alloc.p_p[g] = p;
    }
    evaluate(state, &alloc)
}

/// Feasible iterates beat infeasible ones; among feasible ones the larger smallest
/// ratio wins, among infeasible ones the smaller floor violation.
fn better<T: Real>(a: &Iterate<T>, b: &Iterate<T>, p0: T, r_min: &[T]) -> bool {
    let tol = T::lit(1e-9);
    let (ga, gb) = (qos_gap(a, r_min), qos_gap(b, r_min));
    match (ga <= tol, gb <= tol) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => min_ratio(a, p0) > min_ratio(b, p0),
        (false, false) => ga < gb,
    }
}

fn trace_row<T: Real>(iteration: usize, state: &NetworkState<T>, it: &Iterate<T>, delta: T, p0: T, r_min: &[T], f: Option<T>) -> TraceRow<T> {
    let upsilon: Vec<T> = (0..it.r_sum.len()).map(|g| delta * (it.alloc.group_power(g) + p0)).collect();
    let f = f.unwrap_or_else(|| parametric_value(state, &it.alloc, &upsilon));
    TraceRow {
        iteration,
        delta,
        upsilon,
        f,
        r_sum: it.r_sum.clone(),
        r_total: it.r_sum.iter().copied().sum(),
        power_residual: it.alloc.max_violation(),
        qos_residual: qos_gap(it, r_min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::SinrInputs;

    fn single(spec: Vec<f64>, sigma_sq: f64) -> NetworkState<f64> {
        NetworkState {
            groups: vec![vec![0]],
            spectra: vec![spec],
            b: 1.0,
            inputs: SinrInputs::new(1.0, 1.0, sigma_sq),
            p_total: 1.0,
            power_unit: 1.0,
            overhead: 0.0,
            noise_scale: Vec::new(),
        }
    }

    #[test]
    fn scalar_stationary_point_matches_closed_form() {
        let st = single(vec![2.0], 0.01);
        let a = st.inputs.gain() * 2.0 / 0.01;
        let mut m = GroupMultipliers {
            lambda: 0.6,
            xi: 0.2,
            nu: 0.1,
            beta: vec![0.05],
        };
        let ctx = StepContext {
            delta: 0.5,
            p_max: 1.0,
            cap: 1.0,
            eps_beta: 0.0,
            eps_nu: 0.0,
            sweeps: 1,
            coupling: Coupling::Full,
        };
        let mut pc = 0.0;
        let mut p = vec![0.0];
        let mut m0 = m.clone();
        m0.lambda = 0.0;
        m0.xi = 0.0;
        let mut pc0 = 0.0;
        inner_lagrangian_step(&st, 0, &mut m0, &mut pc0, &mut p, &ctx);
        assert_eq!((pc0, p[0]), (0.0, 0.0));
        let price = 0.5 * 0.6 + 0.1 + 0.05;
        let want = scalar_stationary_power(1.0, a, 0.8, price, 1.0);
        let phi = |x: f64| 0.8 * crate::rates::rate_from_spectrum(1.0, a * x / 2.0, &[2.0]) - price * x;
        let got = maximize_1d(phi, |x| 0.8 * 1.0 * a / ((1.0 + a * x) * std::f64::consts::LN_2) - price, 0.0, 1.0);
        assert!((got - want).abs() < 1e-10, "{got} {want}");
        inner_lagrangian_step(&st, 0, &mut m, &mut pc, &mut p, &ctx);
        assert!(pc + p[0] <= 1.0 + 1e-12);
    }

    #[test]
    fn negative_slope_at_zero_gives_zero() {
        assert_eq!(maximize_1d(|x: f64| -x, |_| -1.0, 0.0, 2.0), 0.0);
        assert_eq!(maximize_1d(|x: f64| x, |_| 1.0, 0.0, 2.0), 2.0);
    }

    #[test]
    fn lambda_step_cases() {
        let mut l = vec![0.5, 0.5];
        let mut xi = vec![0.1, 0.1];
        outer_multiplier_step(&mut l, &mut xi, &[1.0, 1.0], &[3.0, 3.0], &[2.0, 2.0], 0.1, 0.1);
        assert_eq!(l, vec![0.5, 0.5]);
        assert!(xi.iter().all(|&x| x < 0.1));
        let mut l = vec![0.5, 0.5];
        for _ in 0..50 {
            outer_multiplier_step(&mut l, &mut xi, &[1.0, 2.0], &[3.0, 3.0], &[0.0, 0.0], 0.1, 0.1);
        }
        assert_eq!(l[1], 0.0);
        assert_eq!(l[0], 1.0);
    }

    #[test]
    fn parametric_value_at_min_rate_is_zero() {
        let st = single(vec![1.0, 0.5], 0.01);
        let alloc = uniform_allocation(&st, 0.5, 1.0);
        let r = st.group_sum_rate(0, alloc.p_c[0], &alloc.p_p[0]);
        assert!(parametric_value(&st, &alloc, &[0.0]) > 0.0);
        assert!(parametric_value(&st, &alloc, &[r]).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let st = NetworkState {
            groups: vec![vec![0, 1, 2]],
            spectra: vec![vec![0.3, 1.2], vec![0.5, 0.9], vec![2.0, 0.1]],
            b: 0.25,
            inputs: SinrInputs::new(1.0, 0.9, 0.02),
            p_total: 3.0,
            power_unit: 1.0,
            overhead: 0.0,
            noise_scale: Vec::new(),
        };
        let (pc, p): (f64, Vec<f64>) = (0.7, vec![0.2, 0.4, 0.1]);
        let gr = gradient(&st, 0, pc, &p);
        let h: f64 = 1e-6;
        let fd_c = (st.group_sum_rate(0, pc + h, &p) - st.group_sum_rate(0, pc - h, &p)) / (2.0 * h);
        assert!((gr.common - fd_c).abs() < 1e-6);
        for k in 0..3 {
            let mut up = p.clone();
            let mut dn = p.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (st.group_sum_rate(0, pc, &up) - st.group_sum_rate(0, pc, &dn)) / (2.0 * h);
            assert!((gr.private[k] - fd).abs() < 1e-6, "{k}: {} {fd}", gr.private[k]);
        }
    }
}
