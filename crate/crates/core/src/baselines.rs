//! The proposed scheme and the comparison schemes, evaluated on one network drop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::power_opt::{solve_max_min, uniform_allocation, OptimizerConfig, Variant};
use crate::rates::{network_sum_rate, NetworkState, PowerAllocation, RateReport};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeId {
    BiaRsOpt,
    BiaRsSubopt,
    Baseline1,
    Baseline2,
    Bia,
    Rs,
    Noma,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::BiaRsOpt,
        SchemeId::BiaRsSubopt,
        SchemeId::Baseline1,
        SchemeId::Baseline2,
        SchemeId::Bia,
        SchemeId::Rs,
        SchemeId::Noma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::BiaRsOpt => "bia-rs-opt",
            SchemeId::BiaRsSubopt => "bia-rs-subopt",
            SchemeId::Baseline1 => "baseline1",
            SchemeId::Baseline2 => "baseline2",
            SchemeId::Bia => "bia",
            SchemeId::Rs => "rs",
            SchemeId::Noma => "noma",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::config("schemes", format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig<T> {
    /// Common share of each group or cell budget in the fixed splits.
    pub common_fraction: T,
    /// A user is a cell-centre user when its strongest AP beats the second by this much.
    pub edge_margin_db: T,
    /// Power share of the stronger user of each adjacent pair under NOMA.
    pub noma_strong_fraction: T,
}

impl<T: Real> Default for BaselineConfig<T> {
    fn default() -> Self {
        Self {
            common_fraction: T::lit(0.5),
            edge_margin_db: T::lit(3.0),
            noma_strong_fraction: T::lit(0.3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeOutcome<T> {
    pub scheme: SchemeId,
    pub report: RateReport<T>,
    /// Serving sets the report's per-group entries refer to.
    pub groups: Vec<Vec<usize>>,
    pub user_rates: Vec<T>,
    /// Post-detection SINR of each user's strongest stream.
    pub user_sinr: Vec<T>,
    /// Per user, `(SINR, rate)` of every decoded stream carrying its bits, in decoding
    /// order (common share first).
    pub user_streams: Vec<Vec<(T, T)>>,
}

/// Runs one scheme. `groups` is the user partition of the aligned schemes.
pub fn run_scheme<T: Real>(
    net: &Network<T>,
    groups: &[Vec<usize>],
    scheme: SchemeId,
    bcfg: &BaselineConfig<T>,
    ocfg: &OptimizerConfig<T>,
) -> Result<SchemeOutcome<T>> {
    match scheme {
        SchemeId::BiaRsOpt | SchemeId::BiaRsSubopt => {
            let state = net.aligned_state(groups)?;
            let mut cfg = ocfg.clone();
            if scheme == SchemeId::BiaRsSubopt {
                cfg.variant = Variant::BetaNu;
            }
            let sol = solve_max_min(&state, &cfg)?;
            Ok(aligned_outcome(scheme, &state, &sol.alloc, net.users()))
        }
        SchemeId::Baseline1 => {
            let state = net.aligned_state(groups)?;
            let alloc = uniform_allocation(&state, bcfg.common_fraction, ocfg.private_cap_fraction);
            Ok(aligned_outcome(scheme, &state, &alloc, net.users()))
        }
        SchemeId::Bia => bia_rates(net),
        SchemeId::Rs => rs_per_cell_rates(net, bcfg),
        SchemeId::Noma => noma_per_cell_rates(net, bcfg),
        SchemeId::Baseline2 => baseline2_rates(net, bcfg, ocfg),
    }
}

/// Rates of an aligned scheme under a given allocation.
pub fn aligned_outcome<T: Real>(scheme: SchemeId, state: &NetworkState<T>, alloc: &PowerAllocation<T>, users: usize) -> SchemeOutcome<T> {
    let report = network_sum_rate(alloc, state);
    let mut sinr = vec![T::zero(); users];
    let mut streams = vec![Vec::new(); users];
    for (g, members) in state.groups.iter().enumerate() {
        let share = report.r_c[g] / T::from_usize_lossy(members.len());
        for (i, (&k, (gc, gp))) in members.iter().zip(state.member_sinrs(g, alloc.p_c[g], &alloc.p_p[g])).enumerate() {
            let top = state.spectra[k].iter().copied().fold(T::zero(), T::max);
            sinr[k] = gc.max(gp) * top;
            streams[k] = vec![(gc * top, share), (gp * top, report.r_p[g][i])];
        }
    }
    SchemeOutcome {
        user_streams: streams,
        scheme,
        user_rates: report.user_rates(&state.groups, users),
        groups: state.groups.clone(),
        report,
        user_sinr: sinr,
    }
}

/// Uniform split of a rate state: `P_g = P_T/G` with a fixed common share.
pub fn baseline1_rates<T: Real>(state: &NetworkState<T>, bcfg: &BaselineConfig<T>) -> RateReport<T> {
    network_sum_rate(&uniform_allocation(state, bcfg.common_fraction, T::one()), state)
}

/// Classical BIA: every user its own group, private messages only, `P_T/K` each.
pub fn bia_rates<T: Real>(net: &Network<T>) -> Result<SchemeOutcome<T>> {
    let k = net.users();
    let groups: Vec<Vec<usize>> = (0..k).map(|u| vec![u]).collect();
    let state = net.aligned_state(&groups)?;
    let each = state.p_total / T::from_usize_lossy(k);
    let alloc = PowerAllocation {
        p_c: vec![T::zero(); k],
        p_p: vec![vec![each]; k],
        p_g_max: vec![each; k],
        p_p_cap: each,
        p_total: state.p_total,
    };
    Ok(aligned_outcome(SchemeId::Bia, &state, &alloc, k))
}

/// Serving AP and photodiode of each user: the strongest single link.
pub fn serving_links<T: Real>(net: &Network<T>) -> Vec<(usize, usize)> {
    let t = &net.tensor;
    (0..t.users)
        .map(|k| {
            let mut best = (T::neg_infinity(), 0, 0);
            for l in 0..t.aps {
                for m in 0..t.pds {
                    if t.gain(k, m, l) > best.0 {
                        best = (t.gain(k, m, l), l, m);
                    }
                }
            }
            (best.1, best.2)
        })
        .collect()
}

/// Users served by each AP under strongest-link association.
pub fn cells<T: Real>(net: &Network<T>, users: &[usize]) -> Vec<Vec<usize>> {
    let links = serving_links(net);
    let mut out = vec![Vec::new(); net.aps()];
    for &k in users {
        out[links[k].0].push(k);
    }
    out
}

/// Interference power at user `k`'s serving photodiode from the active APs other than
/// its own, each transmitting its full budget.
fn ici<T: Real>(net: &Network<T>, k: usize, link: (usize, usize), active: &[bool]) -> T {
    (0..net.aps())
        .filter(|&l| l != link.0 && active[l])
        .map(|l| {
            let h = net.tensor.gain(k, link.1, l);
            h * h
        })
        .sum()
}

/// Noise multiplier that turns a scalar link with gain `h` and out-of-cell interference
/// `I` into a unit-gain link: `(a·I + σ²) / (σ² h²)`.
fn link_noise_scale<T: Real>(net: &Network<T>, h: T, interference: T) -> T {
    let s = net.inputs.sigma_sq;
    (net.inputs.gain() * interference + s) / (s * h * h)
}

/// Rate state of independent single-antenna cells: one group per cell, unit spectra,
/// each user's own gain and interference carried in its noise multiplier.
fn cell_state<T: Real>(net: &Network<T>, members: &[Vec<usize>], scale: Vec<T>, b: T, p_total: T) -> NetworkState<T> {
    NetworkState {
        groups: members.to_vec(),
        spectra: vec![vec![T::one()]; scale.len()],
        b,
        inputs: net.inputs,
        p_total,
        power_unit: net.power_unit,
        overhead: T::zero(),
        noise_scale: scale,
    }
}

fn active_cells<T: Real>(net: &Network<T>, users: &[usize], links: &[(usize, usize)]) -> (Vec<Vec<usize>>, Vec<bool>) {
    let sets: Vec<Vec<usize>> = cells(net, users).into_iter().filter(|c| !c.is_empty()).collect();
    let mut active = vec![false; net.aps()];
    sets.iter().for_each(|c| active[links[c[0]].0] = true);
    (sets, active)
}

fn cell_noise_scales<T: Real>(net: &Network<T>, links: &[(usize, usize)], active: &[bool]) -> Vec<T> {
    (0..net.users())
        .map(|u| link_noise_scale(net, net.tensor.gain(u, links[u].1, links[u].0), ici(net, u, links[u], active)))
        .collect()
}

/// Rate splitting inside each optical cell with a fixed common share; other cells'
/// transmissions are interference.
pub fn rs_per_cell_rates<T: Real>(net: &Network<T>, bcfg: &BaselineConfig<T>) -> Result<SchemeOutcome<T>> {
    let k = net.users();
    let links = serving_links(net);
    let all: Vec<usize> = (0..k).collect();
    let (sets, active) = active_cells(net, &all, &links);
    let n = T::from_usize_lossy(sets.len());
    let state = cell_state(net, &sets, cell_noise_scales(net, &links, &active), T::one(), n);
    let alloc = PowerAllocation {
        p_c: vec![bcfg.common_fraction; sets.len()],
        p_p: sets
            .iter()
            .map(|m| vec![(T::one() - bcfg.common_fraction) / T::from_usize_lossy(m.len()); m.len()])
            .collect(),
        p_g_max: vec![T::one(); sets.len()],
        p_p_cap: T::one(),
        p_total: n,
    };
    let mut out = aligned_outcome(SchemeId::Rs, &state, &alloc, k);
    out.report = RateReport::assemble(out.report.r_c, out.report.r_p, alloc.consumed() * net.power_unit, net.overhead_watts());
    Ok(out)
}

/// SINR of each user of one NOMA cell, ordered strongest first, with ideal SIC of every
/// weaker user's signal. Each user sees its own squared gain and out-of-cell
/// interference power.
pub fn noma_cell_sinr<T: Real>(gains_sq: &[T], interference: &[T], powers: &[T], a: T, sigma_sq: T) -> Vec<T> {
    (0..gains_sq.len())
        .map(|i| {
            let stronger: T = powers[..i].iter().copied().sum();
            a * powers[i] * gains_sq[i] / (a * stronger * gains_sq[i] + a * interference[i] + sigma_sq)
        })
        .collect()
}

/// Pairs of a cell's users ordered strongest first: `(0,1), (2,3), …`, a trailing user
/// alone.
pub fn noma_pairs(order: &[usize]) -> Vec<Vec<usize>> {
    order.chunks(2).map(<[usize]>::to_vec).collect()
}

/// Power-domain NOMA inside each cell with interference from the other cells: users are
/// paired by gain rank and the pairs share the cell in round robin.
pub fn noma_per_cell_rates<T: Real>(net: &Network<T>, bcfg: &BaselineConfig<T>) -> Result<SchemeOutcome<T>> {
    let k = net.users();
    let links = serving_links(net);
    let all: Vec<usize> = (0..k).collect();
    let (sets, active) = active_cells(net, &all, &links);
    let gsq: Vec<T> = (0..k)
        .map(|u| {
            let h = net.tensor.gain(u, links[u].1, links[u].0);
            h * h
        })
        .collect();
    let interf: Vec<T> = (0..k).map(|u| ici(net, u, links[u], &active)).collect();
    let a = net.inputs.gain();
    let mut sinr = vec![T::zero(); k];
    let mut rates = vec![T::zero(); k];
    let mut streams = vec![Vec::new(); k];
    let mut r_p = Vec::new();
    for c in &sets {
        let mut order = c.clone();
        order.sort_by(|&x, &y| gsq[y].partial_cmp(&gsq[x]).unwrap().then(x.cmp(&y)));
        let pairs = noma_pairs(&order);
        let share = T::one() / T::from_usize_lossy(pairs.len());
        for pair in &pairs {
            let p: Vec<T> = if pair.len() == 2 {
                vec![bcfg.noma_strong_fraction, T::one() - bcfg.noma_strong_fraction]
            } else {
                vec![T::one()]
            };
            let g: Vec<T> = pair.iter().map(|&u| gsq[u]).collect();
            let i: Vec<T> = pair.iter().map(|&u| interf[u]).collect();
            let s = noma_cell_sinr(&g, &i, &p, a, net.inputs.sigma_sq);
            for (j, &u) in pair.iter().enumerate() {
                sinr[u] = s[j];
                rates[u] = share * s[j].ln_1p() / T::LN_2();
                streams[u] = vec![(s[j], rates[u])];
            }
        }
        r_p.push(c.iter().map(|&u| rates[u]).collect());
    }
    let consumed = T::from_usize_lossy(sets.len()) * net.power_unit;
    let report = RateReport::assemble(vec![T::zero(); sets.len()], r_p, consumed, net.overhead_watts());
    Ok(SchemeOutcome {
        scheme: SchemeId::Noma,
        report,
        groups: sets,
        user_rates: rates,
        user_sinr: sinr,
        user_streams: streams,
    })
}

/// Whether user `k` is a cell-centre user: its best AP beats the runner-up by the
/// margin.
pub fn is_centre<T: Real>(net: &Network<T>, k: usize, margin_db: T) -> bool {
    let mut g: Vec<T> = (0..net.aps()).map(|l| net.tensor.best_gain(k, l)).collect();
    g.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if g.len() < 2 || !(g[1] > T::zero()) {
        return true;
    }
    T::lit(10.0) * (g[0] / g[1]).log10() >= margin_db
}

/// Centre users get per-cell RS with interference from the other active cells; edge users
/// are served jointly by every AP (amplitudes add) with RS among them. The two layers
/// share time in proportion to their user counts, and each cell or the joint edge
/// group runs the power optimizer on its own budget.
pub fn baseline2_rates<T: Real>(net: &Network<T>, bcfg: &BaselineConfig<T>, ocfg: &OptimizerConfig<T>) -> Result<SchemeOutcome<T>> {
    let k = net.users();
    let links = serving_links(net);
    let (centre, edge): (Vec<usize>, Vec<usize>) = (0..k).partition(|&u| is_centre(net, u, bcfg.edge_margin_db));
    let kf = T::from_usize_lossy(k);
    let t_c = T::from_usize_lossy(centre.len()) / kf;
    let t_e = T::from_usize_lossy(edge.len()) / kf;

    let mut groups = Vec::new();
    let mut r_c = Vec::new();
    let mut r_p = Vec::new();
    let mut consumed = T::zero();
    let mut sinr = vec![T::zero(); k];
    let mut streams = vec![Vec::new(); k];
    let mut user_rates = vec![T::zero(); k];

    let mut solve = |members: Vec<usize>, scale: Vec<T>, b: T, ap_count: T| -> Result<()> {
        let state = cell_state(net, &[(0..members.len()).collect()], scale, b, T::one());
        let sol = solve_max_min(&state, ocfg)?;
        let o = aligned_outcome(SchemeId::Baseline2, &state, &sol.alloc, members.len());
        for (i, &u) in members.iter().enumerate() {
            sinr[u] = o.user_sinr[i];
            streams[u] = o.user_streams[i].clone();
            user_rates[u] = o.user_rates[i];
        }
        consumed = consumed + sol.alloc.consumed() * ap_count * b;
        r_c.push(o.report.r_c[0]);
        r_p.push(o.report.r_p[0].clone());
        groups.push(members);
        Ok(())
    };

    let (sets, active) = active_cells(net, &centre, &links);
    let scales = cell_noise_scales(net, &links, &active);
    for c in sets {
        let sc = c.iter().map(|&u| scales[u]).collect();
        solve(c, sc, t_c, T::one())?;
    }
    if !edge.is_empty() {
        let t = &net.tensor;
        let sc = edge
            .iter()
            .map(|&u| {
                let amp = (0..t.pds)
                    .map(|m| (0..t.aps).map(|l| t.gain(u, m, l)).sum::<T>())
                    .fold(T::zero(), T::max);
                link_noise_scale(net, amp, T::zero())
            })
            .collect();
        solve(edge, sc, t_e, T::from_usize_lossy(net.aps()))?;
    }
    let report = RateReport::assemble(r_c, r_p, consumed * net.power_unit, net.overhead_watts());
    Ok(SchemeOutcome {
        scheme: SchemeId::Baseline2,
        report,
        groups,
        user_rates,
        user_sinr: sinr,
        user_streams: streams,
    })
}
