//! Monte Carlo experiments over random channel drops.
//!
//! Every axis value of a sweep reuses the same drops (common random numbers): the SNR
//! axis only rescales the noise, the users axis takes nested prefixes of one drop and
//! the blockage axis draws nested masks from one seed. Drops run in parallel and are
//! merged in index order, so tables do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_scheme, BaselineConfig, SchemeId, SchemeOutcome};
use crate::error::{Error, Result};
use crate::grouping::{form_groups, GroupingConfig};
use crate::network::{Network, Overhead};
use crate::power_opt::{solve_max_min, OptimizerConfig, Variant};
use crate::scenario::{db_to_linear, Scenario, ScenarioConfig};

pub const SCHEMA_VERSION: u32 = 1;

const MIN_ERRORS: u64 = 100;
const BOUND_ERRORS: u64 = 10;
const BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SumRate,
    EnergyEfficiency,
    Ber,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    SnrDb,
    Users,
    BlockageP,
    Iterations,
    PamOrder,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::SnrDb => "snr_db",
            Axis::Users => "users",
            Axis::BlockageP => "blockage_p",
            Axis::Iterations => "iterations",
            Axis::PamOrder => "pam_order",
        }
    }
}

fn default_schemes() -> Vec<SchemeId> {
    SchemeId::ALL.to_vec()
}
fn default_drops() -> usize {
    100
}
fn default_pam() -> usize {
    2
}
fn default_cap() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Output file stem; the table key in run configs.
    #[serde(default)]
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeId>,
    pub axis: Axis,
    pub values: Vec<f64>,
    #[serde(default = "default_drops")]
    pub drops: usize,
    /// Overrides the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Reference-link SNR off the SNR axis; the scenario noise model when absent.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Users off the users axis; the scenario count when absent.
    #[serde(default)]
    pub users: Option<usize>,
    #[serde(default)]
    pub blockage_p: f64,
    #[serde(default = "default_pam")]
    pub pam_order: usize,
    /// Monte Carlo symbols per user and point.
    #[serde(default = "default_cap")]
    pub symbol_cap: u64,
}

impl ExperimentSpec {
    /// Every violated invariant, with its config path.
    pub fn validate(&self, path: &str) -> Vec<Error> {
        let mut out = Vec::new();
        let mut bad = |field: &str, msg: String| out.push(Error::config(format!("{path}.{field}"), msg));
        if self.drops < 1 {
            bad("drops", "at least one drop required".into());
        }
        if self.values.is_empty() {
            bad("values", "no axis values".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            bad("values", "axis values must be finite".into());
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            bad("values", "axis values must be strictly increasing".into());
        }
        if self.schemes.is_empty() {
            bad("schemes", "no schemes".into());
        }
        let axes: &[Axis] = match self.kind {
            ExperimentKind::SumRate | ExperimentKind::EnergyEfficiency => &[Axis::SnrDb, Axis::Users, Axis::BlockageP],
            ExperimentKind::Ber => &[Axis::SnrDb, Axis::PamOrder],
            ExperimentKind::Convergence => &[Axis::Iterations],
        };
        if !axes.contains(&self.axis) {
            bad("axis", format!("axis `{}` is incompatible with this experiment kind", self.axis.name()));
        }
        if self.kind == ExperimentKind::Convergence
            && self
                .schemes
                .iter()
                .any(|s| !matches!(s, SchemeId::BiaRsOpt | SchemeId::BiaRsSubopt | SchemeId::Baseline1))
        {
            bad("schemes", "convergence traces cover bia-rs-opt, bia-rs-subopt and baseline1 only".into());
        }
        let integral = |v: f64| v >= 0.0 && v.fract() == 0.0;
        match self.axis {
            Axis::Users if self.values.iter().any(|&v| !integral(v) || v < 1.0) => bad("values", "user counts must be positive integers".into()),
            Axis::Iterations if self.values.iter().any(|&v| !integral(v)) => bad("values", "iterations must be non-negative integers".into()),
            Axis::PamOrder if self.values.iter().any(|&v| !integral(v) || !is_pam_order(v as usize)) => {
                bad("values", "PAM orders must be powers of two >= 2".into())
            }
            Axis::BlockageP if self.values.iter().any(|&v| !(0.0..=1.0).contains(&v)) => bad("values", "blockage probability outside [0, 1]".into()),
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.blockage_p) {
            bad("blockage_p", "blockage probability outside [0, 1]".into());
        }
        if !is_pam_order(self.pam_order) {
            bad("pam_order", "must be a power of two >= 2".into());
        }
        if self.users == Some(0) {
            bad("users", "at least one user required".into());
        }
        if self.symbol_cap == 0 {
            bad("symbol_cap", "must be positive".into());
        }
        out
    }
}

fn is_pam_order(n: usize) -> bool {
    n >= 2 && n.is_power_of_two()
}

/// Everything a drop needs besides the experiment itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentContext {
    pub scenario: ScenarioConfig<f64>,
    pub grouping: GroupingConfig<f64>,
    pub optimizer: OptimizerConfig<f64>,
    pub baselines: BaselineConfig<f64>,
    pub overhead: Overhead<f64>,
    pub seed: u64,
}

impl ExperimentContext {
    pub fn reference(seed: u64) -> Self {
        Self {
            scenario: ScenarioConfig::reference(),
            grouping: GroupingConfig::default(),
            optimizer: OptimizerConfig::default(),
            baselines: BaselineConfig::default(),
            overhead: Overhead { per_ap: 1.0, per_user: 5.0 },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub axis: f64,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub drops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub schema_version: u32,
    pub experiment: String,
    pub axis: String,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, scheme: &str, axis: f64, metric: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.axis == axis && r.metric == metric)
    }

    /// Means of one scheme and metric in axis order.
    pub fn series(&self, scheme: &str, metric: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.scheme == scheme && r.metric == metric).map(|r| r.mean).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Mean and standard error (sample deviation over `√n`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Bits/s/Hz per watt.
pub fn energy_efficiency(rate: f64, consumed_w: f64) -> Result<f64> {
    if !(consumed_w > 0.0) {
        return Err(Error::config("consumed", "consumed power must be positive"));
    }
    Ok(rate / consumed_w)
}

/// Seed of drop `d`.
pub fn drop_seed(seed: u64, d: usize) -> u64 {
    let mut z = seed ^ (d as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One random drop with `users` users; `snr_db` overrides the noise target.
pub fn build_drop(ctx: &ExperimentContext, users: usize, snr_db: Option<f64>, seed: u64) -> Result<Network<f64>> {
    let mut cfg = ctx.scenario.clone();
    cfg.users = users;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sc = Scenario::random(cfg, &mut rng);
    Network::from_scenario(&mut sc, seed, snr_db, ctx.overhead)
}

fn groups_of(ctx: &ExperimentContext, net: &Network<f64>, seed: u64) -> Result<Vec<Vec<usize>>> {
    Ok(form_groups(&net.positions, net.aps(), &ctx.grouping, seed)?.members())
}

/// A network variant for each axis value, sharing one drop.
fn axis_networks(ctx: &ExperimentContext, spec: &ExperimentSpec, seed: u64) -> Result<Vec<Network<f64>>> {
    let users = spec.users.unwrap_or(ctx.scenario.users);
    match spec.axis {
        Axis::SnrDb => {
            let net = build_drop(ctx, users, None, seed)?;
            let net = if spec.blockage_p > 0.0 { net.with_blockage(spec.blockage_p, seed ^ 0xB10C) } else { net };
            Ok(spec.values.iter().map(|&v| net.with_sigma_sq(net.sigma_sq_at_snr(v))).collect())
        }
        Axis::Users => {
            let k_max = spec.values.iter().copied().fold(0.0, f64::max) as usize;
            let net = build_drop(ctx, k_max, spec.snr_db, seed)?;
            let net = if spec.blockage_p > 0.0 { net.with_blockage(spec.blockage_p, seed ^ 0xB10C) } else { net };
            Ok(spec
                .values
                .iter()
                .map(|&v| net.select_users(&(0..v as usize).collect::<Vec<_>>()))
                .collect())
        }
        Axis::BlockageP => {
            let net = build_drop(ctx, users, spec.snr_db, seed)?;
            Ok(spec.values.iter().map(|&p| net.with_blockage(p, seed ^ 0xB10C)).collect())
        }
        Axis::PamOrder => {
            let net = build_drop(ctx, users, spec.snr_db, seed)?;
            Ok(vec![net; spec.values.len()])
        }
        Axis::Iterations => Err(Error::config("axis", "iterations axis belongs to convergence traces")),
    }
}

/// Outcomes of every scheme on every axis value of drop `d`, as `[value][scheme]`.
pub fn evaluate_drop(ctx: &ExperimentContext, spec: &ExperimentSpec, d: usize) -> Result<Vec<Vec<SchemeOutcome<f64>>>> {
    let seed = drop_seed(spec.seed.unwrap_or(ctx.seed), d);
    let nets = axis_networks(ctx, spec, seed)?;
    let fixed_groups = match spec.axis {
        Axis::Users => None,
        _ => Some(groups_of(ctx, &nets[0], seed)?),
    };
    nets.iter()
        .map(|net| {
            let groups = match &fixed_groups {
                Some(g) => g.clone(),
                None => groups_of(ctx, net, seed)?,
            };
            spec.schemes
                .iter()
                .map(|&s| run_scheme(net, &groups, s, &ctx.baselines, &ctx.optimizer))
                .collect()
        })
        .collect()
}

/// Per-drop metric samples, `[drop][value][scheme][metric]`, in drop order.
fn collect<F>(spec: &ExperimentSpec, per_drop: F) -> Result<Vec<Vec<Vec<Vec<f64>>>>>
where
    F: Fn(usize) -> Result<Vec<Vec<Vec<f64>>>> + Sync + Send,
{
    (0..spec.drops).into_par_iter().map(per_drop).collect()
}

fn tabulate(spec: &ExperimentSpec, labels: &[String], metrics: &[&str], samples: &[Vec<Vec<Vec<f64>>>]) -> ResultTable {
    let mut rows = Vec::new();
    for (i, &v) in spec.values.iter().enumerate() {
        for (s, label) in labels.iter().enumerate() {
            for (m, metric) in metrics.iter().enumerate() {
                let xs: Vec<f64> = samples.iter().map(|d| d[i][s][m]).collect();
                let (mean, stderr) = mean_stderr(&xs);
                rows.push(ResultRow {
                    scheme: label.clone(),
                    axis: v,
                    metric: metric.to_string(),
                    mean,
                    stderr,
                    drops: xs.len(),
                });
            }
        }
    }
    ResultTable {
        schema_version: SCHEMA_VERSION,
        experiment: spec.name.clone(),
        axis: spec.axis.name().into(),
        rows,
    }
}

fn check(spec: &ExperimentSpec) -> Result<()> {
    match spec.validate("experiment").into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub const SWEEP_METRICS: [&str; 3] = ["sum_rate", "ee", "consumed_w"];

/// Sum rate, energy efficiency and consumed power of each scheme per axis value.
pub fn sweep_samples(ctx: &ExperimentContext, spec: &ExperimentSpec) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    collect(spec, |d| {
        Ok(evaluate_drop(ctx, spec, d)?
            .iter()
            .map(|per_value| {
                per_value
                    .iter()
                    .map(|o| vec![o.report.r_total, o.report.ee, o.report.consumed])
                    .collect()
            })
            .collect())
    })
}

pub fn run_sweep(ctx: &ExperimentContext, spec: &ExperimentSpec) -> Result<ResultTable> {
    check(spec)?;
    if !matches!(spec.kind, ExperimentKind::SumRate | ExperimentKind::EnergyEfficiency) {
        return Err(Error::config("experiment.kind", "rate sweep requested for a non-rate experiment"));
    }
    let samples = sweep_samples(ctx, spec)?;
    let labels: Vec<String> = spec.schemes.iter().map(|s| s.name().to_string()).collect();
    Ok(tabulate(spec, &labels, &SWEEP_METRICS, &samples))
}

/// Q-function.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Gray-coded `N`-PAM bit error rate at symbol SNR `γ` (nearest-neighbour errors only;
/// exact for `N = 2`).
pub fn pam_ber_analytic(n: usize, gamma: f64) -> f64 {
    let nf = n as f64;
    let bits = nf.log2();
    2.0 * (1.0 - 1.0 / nf) / bits * q_function((3.0 * gamma / (nf * nf - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BerCount {
    pub errors: u64,
    pub bits: u64,
}

impl BerCount {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    /// Too few errors for a point estimate; the rate is an upper bound.
    pub fn is_bound(&self) -> bool {
        self.errors < BOUND_ERRORS
    }
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Monte Carlo bit errors of Gray-coded unit-energy `N`-PAM over real AWGN at SNR `γ`,
/// until [`MIN_ERRORS`] errors or `cap` symbols.
pub fn pam_ber_monte_carlo<R: Rng + ?Sized>(n: usize, gamma: f64, cap: u64, rng: &mut R) -> BerCount {
    let bits_per = n.trailing_zeros() as u64;
    if gamma.is_infinite() {
        return BerCount { errors: 0, bits: cap * bits_per };
    }
    let d = (3.0 / ((n * n - 1) as f64)).sqrt();
    let sigma = 1.0 / gamma.sqrt();
    let top = (n - 1) as f64;
    let mut errors = 0u64;
    let mut symbols = 0u64;
    while symbols < cap && errors < MIN_ERRORS {
        for _ in 0..BATCH.min(cap - symbols) {
            let i = rng.random_range(0..n);
            let a = (2.0 * i as f64 - top) * d;
            let z: f64 = rng.sample(StandardNormal);
            let y = a + sigma * z;
            let j = ((y / d + top) / 2.0).round().clamp(0.0, top) as usize;
            errors += (gray(i) ^ gray(j)).count_ones() as u64;
        }
        symbols += BATCH.min(cap - symbols);
    }
    BerCount {
        errors,
        bits: symbols * bits_per,
    }
}

pub const BER_METRICS: [&str; 3] = ["ber", "ber_analytic", "ber_bound"];

/// Bit-weighted bit error rate over every decoded stream of a scheme, each stream
/// weighted by the rate it carries: `[monte carlo, analytic, bound fraction]`. Streams
/// without rate carry no bits; a scheme carrying nothing reports 1/2.
pub fn stream_ber<R: Rng + ?Sized>(o: &SchemeOutcome<f64>, n: usize, cap: u64, rng: &mut R) -> Vec<f64> {
    let (mut w, mut ber, mut ana, mut bound) = (0.0, 0.0, 0.0, 0.0);
    for &(g, r) in o.user_streams.iter().flatten() {
        if !(r > 0.0) {
            continue;
        }
        let c = pam_ber_monte_carlo(n, g, cap, rng);
        w += r;
        ber += r * c.ber();
        ana += r * pam_ber_analytic(n, g);
        bound += r * f64::from(u8::from(c.is_bound()));
    }
    if w > 0.0 {
        vec![ber / w, ana / w, bound / w]
    } else {
        vec![0.5, 0.5, 0.0]
    }
}

/// Bit-weighted bit error rate of each scheme (mean over drops), with the analytic value
/// and the bit share whose estimate is only an upper bound. An extra
/// `awgn` row runs a single link at the axis SNR.
pub fn run_ber(ctx: &ExperimentContext, spec: &ExperimentSpec) -> Result<ResultTable> {
    check(spec)?;
    if spec.kind != ExperimentKind::Ber {
        return Err(Error::config("experiment.kind", "BER requested for a rate-only experiment"));
    }
    let order = |i: usize| match spec.axis {
        Axis::PamOrder => spec.values[i] as usize,
        _ => spec.pam_order,
    };
    let samples = collect(spec, |d| {
        let outcomes = evaluate_drop(ctx, spec, d)?;
        let seed = drop_seed(spec.seed.unwrap_or(ctx.seed), d);
        Ok(outcomes
            .iter()
            .enumerate()
            .map(|(i, per_value)| {
                let n = order(i);
                let mut rows: Vec<Vec<f64>> = per_value
                    .iter()
                    .enumerate()
                    .map(|(s, o)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64) << 40) ^ ((s as u64) << 32));
                        stream_ber(o, n, spec.symbol_cap, &mut rng)
                    })
                    .collect();
                let gamma = match spec.axis {
                    Axis::SnrDb => db_to_linear(spec.values[i]),
                    _ => db_to_linear(spec.snr_db.unwrap_or(30.0)),
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64) << 40) ^ 0xA3);
                let c = pam_ber_monte_carlo(n, gamma, spec.symbol_cap, &mut rng);
                rows.push(vec![c.ber(), pam_ber_analytic(n, gamma), f64::from(u8::from(c.is_bound()))]);
                rows
            })
            .collect())
    })?;
    let mut labels: Vec<String> = spec.schemes.iter().map(|s| s.name().to_string()).collect();
    labels.push("awgn".into());
    Ok(tabulate(spec, &labels, &BER_METRICS, &samples))
}

pub const TRACE_METRICS: [&str; 3] = ["sum_rate", "best_sum_rate", "final_sum_rate"];

/// Per-iteration sum rate of the full and the β,ν-only solvers, run for exactly
/// `max(values)` iterations. `best_sum_rate` is the running maximum and
/// `final_sum_rate` the polished solution; Baseline 1 rows are constant.
pub fn run_convergence_trace(ctx: &ExperimentContext, spec: &ExperimentSpec) -> Result<ResultTable> {
    check(spec)?;
    if spec.kind != ExperimentKind::Convergence {
        return Err(Error::config("experiment.kind", "convergence trace requested for another experiment"));
    }
    let t_max = spec.values.iter().copied().fold(0.0, f64::max) as usize;
    let users = spec.users.unwrap_or(ctx.scenario.users);
    let samples = collect(spec, |d| {
        let seed = drop_seed(spec.seed.unwrap_or(ctx.seed), d);
        let net = build_drop(ctx, users, spec.snr_db, seed)?;
        let net = if spec.blockage_p > 0.0 { net.with_blockage(spec.blockage_p, seed ^ 0xB10C) } else { net };
        let groups = groups_of(ctx, &net, seed)?;
        let state = net.aligned_state(&groups)?;
        let per_scheme: Vec<Vec<Vec<f64>>> = spec
            .schemes
            .iter()
            .map(|&s| -> Result<Vec<Vec<f64>>> {
                if s == SchemeId::Baseline1 {
                    let r = run_scheme(&net, &groups, s, &ctx.baselines, &ctx.optimizer)?.report.r_total;
                    return Ok(vec![vec![r, r, r]; spec.values.len()]);
                }
                let mut cfg = ctx.optimizer.clone();
                cfg.iterations = t_max;
                cfg.tol_f = 0.0;
                cfg.tol_power = 0.0;
                if s == SchemeId::BiaRsSubopt {
                    cfg.variant = Variant::BetaNu;
                }
                let sol = solve_max_min(&state, &cfg)?;
                let mut best = f64::NEG_INFINITY;
                let running: Vec<f64> = sol
                    .trace
                    .iter()
                    .map(|r| {
                        best = best.max(r.r_total);
                        best
                    })
                    .collect();
                Ok(spec
                    .values
                    .iter()
                    .map(|&v| {
                        let t = (v as usize).min(sol.trace.len() - 1);
                        vec![sol.trace[t].r_total, running[t], sol.report.r_total]
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok((0..spec.values.len())
            .map(|i| per_scheme.iter().map(|s| s[i].clone()).collect())
            .collect())
    })?;
    let labels: Vec<String> = spec.schemes.iter().map(|s| s.name().to_string()).collect();
    Ok(tabulate(spec, &labels, &TRACE_METRICS, &samples))
}

/// Dispatches on the experiment kind.
pub fn run_experiment(ctx: &ExperimentContext, spec: &ExperimentSpec) -> Result<ResultTable> {
    match spec.kind {
        ExperimentKind::SumRate | ExperimentKind::EnergyEfficiency => run_sweep(ctx, spec),
        ExperimentKind::Ber => run_ber(ctx, spec),
        ExperimentKind::Convergence => run_convergence_trace(ctx, spec),
    }
}

/// Positions, groups and normalized noise of drop 0, for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDump {
    pub seed: u64,
    pub aps: usize,
    pub positions: Vec<(f64, f64)>,
    pub groups: Vec<Vec<usize>>,
    pub sigma_sq: f64,
    pub block_fraction: f64,
}

pub fn scenario_dump(ctx: &ExperimentContext, users: usize, snr_db: Option<f64>) -> Result<ScenarioDump> {
    let seed = drop_seed(ctx.seed, 0);
    let net = build_drop(ctx, users, snr_db, seed)?;
    let groups = groups_of(ctx, &net, seed)?;
    Ok(ScenarioDump {
        seed,
        aps: net.aps(),
        positions: net.positions.clone(),
        block_fraction: net.block_fraction(groups.len()),
        groups,
        sigma_sq: net.inputs.sigma_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_formula() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn ee_halves() {
        let a = energy_efficiency(10.0, 2.0).unwrap();
        let b = energy_efficiency(10.0, 4.0).unwrap();
        assert_eq!(a, 2.0 * b);
        assert!(energy_efficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for i in 0..15 {
            assert_eq!((gray(i) ^ gray(i + 1)).count_ones(), 1);
        }
    }

    #[test]
    fn noiseless_ber_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = pam_ber_monte_carlo(4, f64::INFINITY, 1000, &mut rng);
        assert_eq!(c.errors, 0);
        let c = pam_ber_monte_carlo(2, 1e12, 1000, &mut rng);
        assert_eq!(c.errors, 0);
    }

    #[test]
    fn q_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((q_function(1.0) - 0.158_655_253_931_457_05).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let spec = ExperimentSpec {
            name: "x".into(),
            kind: ExperimentKind::Ber,
            schemes: vec![SchemeId::Rs],
            axis: Axis::Users,
            values: vec![2.0, 1.0],
            drops: 0,
            seed: None,
            snr_db: None,
            users: None,
            blockage_p: 0.0,
            pam_order: 3,
            symbol_cap: 10,
        };
        let errs = spec.validate("experiments[0]");
        assert_eq!(errs.len(), 4);
    }
}
