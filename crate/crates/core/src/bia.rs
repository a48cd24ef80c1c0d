//! Blind interference alignment as an outer precoder across user groups.
//!
//! The transmission block has two phases. In the shared phase every group is served in
//! every slot and the receivers of group `g` step through modes `0..L-1` following a
//! mixed-radix enumeration of `{0..L-2}^G`. In the dedicated phase of group `g` only that
//! group is served, its receivers sit on mode `L-1`, and the other groups keep sweeping
//! so that each of them observes a clean copy of group `g`'s symbols through the same
//! mode it used in the shared slot. Subtracting that copy removes the interference at the
//! cost of one extra noise term per interferer.
//!
//! Alignment block `ℓ` of group `g` is indexed by the digits `t_{-g}` of the other
//! groups; it collects the `L-1` shared slots with those digits and the dedicated slot
//! `ℓ` of `g`, so the group sees each of its `L` modes exactly once.

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Default cap on the number of slots in a block.
pub const DEFAULT_SLOT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDimensions {
    pub l: usize,
    pub g: usize,
    pub slots: u128,
    pub ab_per_group: u128,
    pub total_ab: u128,
}

fn pow_checked(b: u128, e: usize) -> Result<u128> {
    (0..e).try_fold(1u128, |acc, _| acc.checked_mul(b)).ok_or(Error::BlockTooLarge {
        slots: u128::MAX,
        cap: u64::MAX,
    })
}

/// Slot and alignment-block counts for `L` transmitters and `G` groups.
pub fn block_dimensions(l: usize, g: usize) -> Result<BlockDimensions> {
    if l < 2 {
        return Err(Error::TooFewTransmitters(l));
    }
    if g < 1 {
        return Err(Error::config("grouping.groups", "at least one group required"));
    }
    let base = (l - 1) as u128;
    let ab = pow_checked(base, g - 1)?;
    let shared = ab.checked_mul(base);
    let total_ab = ab.checked_mul(g as u128);
    let slots = shared.zip(total_ab).and_then(|(s, t)| s.checked_add(t));
    match (slots, total_ab) {
        (Some(slots), Some(total_ab)) => Ok(BlockDimensions {
            l,
            g,
            slots,
            ab_per_group: ab,
            total_ab,
        }),
        _ => Err(Error::BlockTooLarge {
            slots: u128::MAX,
            cap: u64::MAX,
        }),
    }
}

/// Fraction of the block spent on one alignment block, `1 / (G + L - 1)`.
pub fn alignment_ratio(l: usize, g: usize) -> Result<Ratio<u64>> {
    if l < 2 {
        return Err(Error::TooFewTransmitters(l));
    }
    Ok(Ratio::new(1, (g + l - 1) as u64))
}

/// Noise variance multiplier of each mode position of an alignment block after
/// inter-group cancellation: `G` for the `L-1` shared slots, `1` for the dedicated one.
pub fn noise_multiplicities<T: Real>(l: usize, g: usize) -> Vec<T> {
    let mut v = vec![T::from_usize_lossy(g); l.saturating_sub(1)];
    v.push(T::one());
    v
}

/// Symbol carried in a slot: alignment block `block` of group `group`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolRef {
    pub group: usize,
    pub block: usize,
}

/// Receiver modes of every group in every slot, plus which symbols each slot carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSchedule {
    /// `modes[g][s]`: receiver mode of group `g` in slot `s`.
    pub modes: Vec<Vec<usize>>,
    /// `active[s]`: symbols transmitted in slot `s`.
    pub active: Vec<Vec<SymbolRef>>,
}

impl ModeSchedule {
    pub fn slots(&self) -> usize {
        self.active.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPrecoder {
    pub group: usize,
    /// Slots with an identity row-block, ascending.
    pub slots: Vec<usize>,
    /// Each alignment block as its `L` slots ordered by the group's receiver mode.
    pub alignment_blocks: Vec<Vec<usize>>,
}

impl GroupPrecoder {
    /// Dense `𝒱L × L` form: an identity row-block on every slot where the group is served,
    /// zero elsewhere.
    pub fn dense<T: Real>(&self, l: usize, slots: usize) -> Matrix<T> {
        let mut b = Matrix::zeros(slots * l, l);
        for &s in &self.slots {
            for i in 0..l {
                b[(s * l + i, i)] = T::one();
            }
        }
        b
    }
}

/// Complete block structure for a given `(L, G)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionBlock {
    pub dims: BlockDimensions,
    pub schedule: ModeSchedule,
    pub precoders: Vec<GroupPrecoder>,
}

fn digits(mut idx: usize, len: usize, base: usize) -> Vec<usize> {
    let mut d = vec![0; len];
    for i in (0..len).rev() {
        d[i] = idx % base;
        idx /= base;
    }
    d
}

fn radix(d: &[usize], base: usize) -> usize {
    d.iter().fold(0, |acc, &x| acc * base + x)
}

fn without(d: &[usize], g: usize) -> Vec<usize> {
    d.iter().enumerate().filter(|&(i, _)| i != g).map(|(_, &x)| x).collect()
}

fn with(rest: &[usize], g: usize, v: usize) -> Vec<usize> {
    let mut d = rest.to_vec();
    d.insert(g, v);
    d
}

/// Builds the block for `(L, G)` subject to a slot cap.
pub fn build_group_precoders(l: usize, g: usize, slot_cap: u64) -> Result<TransmissionBlock> {
    let dims = block_dimensions(l, g)?;
    if dims.slots > slot_cap as u128 {
        return Err(Error::BlockTooLarge {
            slots: dims.slots,
            cap: slot_cap,
        });
    }
    let base = l - 1;
    let ab = dims.ab_per_group as usize;
    let shared = ab * base;
    let total = dims.slots as usize;
    let dedicated = |grp: usize, blk: usize| shared + grp * ab + blk;

    let mut modes = vec![vec![0usize; total]; g];
    let mut active = vec![Vec::new(); total];
    for s in 0..shared {
        let t = digits(s, g, base);
        for grp in 0..g {
            modes[grp][s] = t[grp];
            active[s].push(SymbolRef {
                group: grp,
                block: radix(&without(&t, grp), base),
            });
        }
    }
    for grp in 0..g {
        for blk in 0..ab {
            let s = dedicated(grp, blk);
            let rest = digits(blk, g - 1, base);
            for other in 0..g {
                modes[other][s] = if other == grp {
                    base
                } else {
                    let pos = if other < grp { other } else { other - 1 };
                    rest[pos]
                };
            }
            active[s].push(SymbolRef { group: grp, block: blk });
        }
    }

    let precoders = (0..g)
        .map(|grp| {
            let alignment_blocks: Vec<Vec<usize>> = (0..ab)
                .map(|blk| {
                    let rest = digits(blk, g - 1, base);
                    let mut v: Vec<usize> = (0..base).map(|m| radix(&with(&rest, grp, m), base)).collect();
                    v.push(dedicated(grp, blk));
                    v
                })
                .collect();
            let mut slots: Vec<usize> = alignment_blocks.iter().flatten().copied().collect();
            slots.sort_unstable();
            GroupPrecoder {
                group: grp,
                slots,
                alignment_blocks,
            }
        })
        .collect();
    Ok(TransmissionBlock {
        dims,
        schedule: ModeSchedule { modes, active },
        precoders,
    })
}

impl TransmissionBlock {
    pub fn l(&self) -> usize {
        self.dims.l
    }

    pub fn g(&self) -> usize {
        self.dims.g
    }

    /// Slot where `sym` is transmitted alone while group `observer` sits on `mode`.
    pub fn cleaning_slot(&self, sym: SymbolRef, observer: usize, mode: usize) -> Option<usize> {
        let ab = self.dims.ab_per_group as usize;
        let s = (self.dims.l - 1) * ab + sym.group * ab + sym.block;
        let ok = self.schedule.active[s].len() == 1 && self.schedule.modes[observer][s] == mode;
        ok.then_some(s)
    }

    /// Deterministic JSON description: per-slot modes and symbols, per-group blocks.
    pub fn report(&self) -> serde_json::Value {
        let slots: Vec<serde_json::Value> = (0..self.schedule.slots())
            .map(|s| {
                serde_json::json!({
                    "slot": s,
                    "modes": (0..self.g()).map(|g| self.schedule.modes[g][s]).collect::<Vec<_>>(),
                    "active": self.schedule.active[s].iter().map(|a| [a.group, a.block]).collect::<Vec<_>>(),
                })
            })
            .collect();
        let groups: Vec<serde_json::Value> = self
            .precoders
            .iter()
            .map(|p| serde_json::json!({"group": p.group, "alignment_blocks": p.alignment_blocks}))
            .collect();
        serde_json::json!({
            "l": self.dims.l,
            "g": self.dims.g,
            "slots": self.dims.slots as u64,
            "ab_per_group": self.dims.ab_per_group as u64,
            "slots_detail": slots,
            "groups": groups,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub user: usize,
    pub block: usize,
    pub desired_rank: usize,
    pub max_interference_rank: usize,
    pub uncleanable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodabilityReport {
    pub checked_blocks: usize,
    pub violations: Vec<Violation>,
}

impl DecodabilityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks, for every user and every alignment block of its group, that the desired
/// channel over the block has rank `L`, that each interfering symbol reaches the block
/// through at most one dimension, and that a clean copy of it exists elsewhere.
///
/// `modes[k]` is the `L × L` matrix of user `k` (row `m` = channel in mode `m`);
/// `group_of[k]` its group.
pub fn verify_decodability<T: Real>(block: &TransmissionBlock, modes: &[Matrix<T>], group_of: &[usize]) -> DecodabilityReport {
    let l = block.l();
    let tol = T::rank_tol();
    let mut violations = Vec::new();
    let mut checked = 0;
    for (k, (h, &g)) in modes.iter().zip(group_of).enumerate() {
        let sched = &block.schedule;
        for (bi, ab) in block.precoders[g].alignment_blocks.iter().enumerate() {
            checked += 1;
            let rows: Vec<Vec<T>> = ab.iter().map(|&s| h.row(sched.modes[g][s]).to_vec()).collect();
            let desired = Matrix::from_rows(&rows).rank(tol);
            let mut interferers: Vec<(SymbolRef, Vec<usize>)> = Vec::new();
            for &s in ab {
                for &sym in sched.active[s].iter().filter(|a| a.group != g) {
                    match interferers.iter_mut().find(|(x, _)| *x == sym) {
                        Some((_, v)) => v.push(s),
                        None => interferers.push((sym, vec![s])),
                    }
                }
            }
            let mut max_rank = 0;
            let mut uncleanable = 0;
            for (sym, slots) in &interferers {
                let rows: Vec<Vec<T>> = slots.iter().map(|&s| h.row(sched.modes[g][s]).to_vec()).collect();
                max_rank = max_rank.max(Matrix::from_rows(&rows).rank(tol));
                let mut ms: Vec<usize> = slots.iter().map(|&s| sched.modes[g][s]).collect();
                ms.dedup();
                if ms.len() != 1 || block.cleaning_slot(*sym, g, ms[0]).is_none() {
                    uncleanable += 1;
                }
            }
            if desired < l || max_rank > 1 || uncleanable > 0 {
                violations.push(Violation {
                    user: k,
                    block: bi,
                    desired_rank: desired,
                    max_interference_rank: max_rank,
                    uncleanable,
                });
            }
        }
    }
    DecodabilityReport {
        checked_blocks: checked,
        violations,
    }
}

/// Per-alignment-block noise after cancellation for group `g`: each slot's variance is
/// `σ² (1 + number of interferers subtracted from it)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveNoise<T> {
    /// Diagonal of `R_z̃` per alignment block, ordered by mode.
    pub blocks: Vec<Vec<T>>,
}

impl<T: Real> EffectiveNoise<T> {
    pub fn covariance(&self, block: usize) -> Matrix<T> {
        Matrix::diag(&self.blocks[block])
    }
}

pub fn intergroup_cancel<T: Real>(g: usize, block: &TransmissionBlock, sigma_sq: T) -> EffectiveNoise<T> {
    let blocks = block.precoders[g]
        .alignment_blocks
        .iter()
        .map(|ab| {
            ab.iter()
                .map(|&s| {
                    let subtracted = block.schedule.active[s].iter().filter(|a| a.group != g).count();
                    sigma_sq * T::from_usize_lossy(1 + subtracted)
                })
                .collect()
        })
        .collect();
    EffectiveNoise { blocks }
}

/// Signals received by each user in each slot: `y[k][s] = h_k(mode)ᵀ Σ u_sym + z`.
///
/// `symbols[g][ℓ]` is the `L`-vector carried by alignment block `ℓ` of group `g`.
pub fn transmit<T: Real, R: Rng + ?Sized>(
    block: &TransmissionBlock,
    modes: &[Matrix<T>],
    group_of: &[usize],
    symbols: &[Vec<Vec<T>>],
    noise_std: T,
    rng: &mut R,
) -> Vec<Vec<T>> {
    let normal = rand_distr::StandardNormal;
    modes
        .iter()
        .zip(group_of)
        .map(|(h, &g)| {
            (0..block.schedule.slots())
                .map(|s| {
                    let hrow = h.row(block.schedule.modes[g][s]);
                    let sig: T = block.schedule.active[s]
                        .iter()
                        .map(|a| hrow.iter().zip(&symbols[a.group][a.block]).map(|(&x, &u)| x * u).sum::<T>())
                        .sum();
                    let z = if noise_std > T::zero() {
                        noise_std * T::lit(rng.sample::<f64, _>(normal))
                    } else {
                        T::zero()
                    };
                    sig + z
                })
                .collect()
        })
        .collect()
}

/// Cleaned observations of alignment block `ℓ` for a user of group `g`, ordered by mode.
pub fn clean_block<T: Real>(block: &TransmissionBlock, g: usize, ab: usize, received: &[T]) -> Vec<T> {
    block.precoders[g].alignment_blocks[ab]
        .iter()
        .map(|&s| {
            let mode = block.schedule.modes[g][s];
            block.schedule.active[s]
                .iter()
                .filter(|a| a.group != g)
                .fold(received[s], |y, &a| {
                    let c = block.cleaning_slot(a, g, mode).expect("cleaning slot exists by construction");
                    y - received[c]
                })
        })
        .collect()
}

/// Zero-forcing decode of every alignment block of the user's group.
pub fn decode_user<T: Real>(block: &TransmissionBlock, h: &Matrix<T>, g: usize, received: &[T]) -> Result<Vec<Vec<T>>> {
    let l = block.l();
    let hb = Matrix::from_fn(l, l, |i, j| h[(i, j)]);
    (0..block.precoders[g].alignment_blocks.len())
        .map(|ab| {
            let y = clean_block(block, g, ab, received);
            hb.solve(&y).ok_or(Error::SingularCovariance)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let d = block_dimensions(2, 2).unwrap();
        assert_eq!((d.slots, d.ab_per_group), (3, 1));
        let d = block_dimensions(3, 2).unwrap();
        assert_eq!((d.slots, d.ab_per_group), (8, 2));
        let d = block_dimensions(16, 4).unwrap();
        assert_eq!((d.slots, d.ab_per_group), (64125, 3375));
        assert_eq!(block_dimensions(1, 2), Err(Error::TooFewTransmitters(1)));
    }

    #[test]
    fn ratios() {
        assert_eq!(alignment_ratio(2, 2).unwrap(), Ratio::new(1, 3));
        assert_eq!(alignment_ratio(2, 1).unwrap(), Ratio::new(1, 2));
        assert_eq!(alignment_ratio(16, 4).unwrap(), Ratio::new(1, 19));
    }

    #[test]
    fn single_group_block() {
        let b = build_group_precoders(2, 1, DEFAULT_SLOT_CAP).unwrap();
        let dense: Matrix<f64> = b.precoders[0].dense(2, 2);
        assert_eq!(dense, Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]));
        assert_eq!(b.precoders[0].alignment_blocks, vec![vec![0, 1]]);
        let n = intergroup_cancel(0, &b, 1.0);
        assert_eq!(n.blocks, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn mode_schedule_covers_all_modes() {
        for (l, g) in [(3, 2), (4, 3), (2, 3)] {
            let b = build_group_precoders(l, g, DEFAULT_SLOT_CAP).unwrap();
            for p in &b.precoders {
                assert_eq!(p.slots.len(), l * (l - 1).pow(g as u32 - 1));
                for ab in &p.alignment_blocks {
                    let ms: Vec<usize> = ab.iter().map(|&s| b.schedule.modes[p.group][s]).collect();
                    assert_eq!(ms, (0..l).collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn slot_cap_enforced() {
        let e = build_group_precoders(16, 5, DEFAULT_SLOT_CAP).unwrap_err();
        assert!(matches!(e, Error::BlockTooLarge { .. }));
    }

    #[test]
    fn duplicate_modes_fail() {
        let b = build_group_precoders(2, 2, DEFAULT_SLOT_CAP).unwrap();
        let h = Matrix::from_rows(&[vec![0.3, 0.7], vec![0.3, 0.7]]);
        let rep = verify_decodability(&b, &[h.clone(), h], &[0, 1]);
        assert!(!rep.passed());
        assert_eq!(rep.violations[0].desired_rank, 1);
    }
}
