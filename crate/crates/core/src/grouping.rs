//! Position-based user grouping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_LLOYD_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMap<T> {
    /// Group of each user.
    pub assignment: Vec<usize>,
    pub centroids: Vec<(T, T)>,
    pub d_th: T,
}

impl<T: Real> GroupMap<T> {
    pub fn group_count(&self) -> usize {
        self.centroids.len()
    }

    /// Members of each group, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.group_count()];
        for (k, &g) in self.assignment.iter().enumerate() {
            out[g].push(k);
        }
        out
    }

    /// Within-cluster sum of squared distances.
    pub fn distortion(&self, positions: &[(T, T)]) -> T {
        positions
            .iter()
            .zip(&self.assignment)
            .map(|(&p, &g)| dist2(p, self.centroids[g]))
            .sum()
    }
}

fn dist2<T: Real>(a: (T, T), b: (T, T)) -> T {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

fn nearest<T: Real>(p: (T, T), cs: &[(T, T)]) -> usize {
    let mut best = 0;
    for (i, &c) in cs.iter().enumerate() {
        if dist2(p, c) < dist2(p, cs[best]) {
            best = i;
        }
    }
    best
}

fn centroid<T: Real>(pts: &[(T, T)]) -> (T, T) {
    let n = T::from_usize_lossy(pts.len());
    let (sx, sy) = pts.iter().fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + x, b + y));
    (sx / n, sy / n)
}

/// Seeded farthest-point initialisation: a random first centre, then repeatedly the
/// point farthest from all chosen centres (ties to the lowest index).
fn init_centres<T: Real>(pos: &[(T, T)], g: usize, seed: u64) -> Vec<(T, T)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cs = vec![pos[rng.random_range(0..pos.len())]];
    while cs.len() < g {
        let mut best = (T::neg_infinity(), 0);
        for (i, &p) in pos.iter().enumerate() {
            let d = cs.iter().map(|&c| dist2(p, c)).fold(T::infinity(), T::min);
            if d > best.0 {
                best = (d, i);
            }
        }
        cs.push(pos[best.1]);
    }
    cs
}

/// Lloyd's algorithm on floor-plane positions. Empty clusters are reseeded with the
/// point farthest from its centre. Labels are canonical: groups are numbered by
/// centroid `(x, y)` in lexicographic order.
pub fn kmeans_groups<T: Real>(positions: &[(T, T)], g: usize, d_th: T, seed: u64) -> Result<GroupMap<T>> {
    let k = positions.len();
    if g == 0 || k < g {
        return Err(Error::TooFewUsers { users: k, groups: g });
    }
    let mut cs = init_centres(positions, g, seed);
    let mut assign: Vec<usize> = positions.iter().map(|&p| nearest(p, &cs)).collect();
    for _ in 0..MAX_LLOYD_ITERS {
        fix_empty(positions, &mut assign, &cs);
        cs = centroids(positions, &assign, g);
        let next: Vec<usize> = positions
            .iter()
            .zip(&assign)
            .map(|(&p, &a)| {
                let n = nearest(p, &cs);
                if dist2(p, cs[n]) < dist2(p, cs[a]) {
                    n
                } else {
                    a
                }
            })
            .collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    fix_empty(positions, &mut assign, &cs);
    threshold_pass(positions, &mut assign, g, d_th);
    let cs = centroids(positions, &assign, g);
    Ok(canonical(GroupMap {
        assignment: assign,
        centroids: cs,
        d_th,
    }))
}

fn centroids<T: Real>(pos: &[(T, T)], assign: &[usize], g: usize) -> Vec<(T, T)> {
    (0..g)
        .map(|c| {
            let pts: Vec<(T, T)> = pos.iter().zip(assign).filter(|&(_, &a)| a == c).map(|(&p, _)| p).collect();
            centroid(&pts)
        })
        .collect()
}

fn total_distortion<T: Real>(pos: &[(T, T)], assign: &[usize], g: usize) -> T {
    let cs = centroids(pos, assign, g);
    pos.iter().zip(assign).map(|(&p, &a)| dist2(p, cs[a])).sum()
}

/// Moves a user into a foreign group whose centroid lies within `d_th` when that lowers
/// the total within-cluster distortion and leaves no group empty.
fn threshold_pass<T: Real>(pos: &[(T, T)], assign: &mut [usize], g: usize, d_th: T) {
    let d2 = d_th * d_th;
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..pos.len() {
            let cs = centroids(pos, assign, g);
            let own = assign[i];
            if assign.iter().filter(|&&a| a == own).count() < 2 {
                continue;
            }
            let base = total_distortion(pos, assign, g);
            for c in (0..g).filter(|&c| c != own && dist2(pos[i], cs[c]) <= d2) {
                assign[i] = c;
                if total_distortion(pos, assign, g) < base {
                    improved = true;
                    break;
                }
                assign[i] = own;
            }
        }
    }
}

fn fix_empty<T: Real>(pos: &[(T, T)], assign: &mut [usize], cs: &[(T, T)]) {
    for c in 0..cs.len() {
        let mut counts = vec![0usize; cs.len()];
        assign.iter().for_each(|&a| counts[a] += 1);
        if counts[c] > 0 {
            continue;
        }
        let donor = (0..pos.len())
            .filter(|&i| counts[assign[i]] > 1)
            .max_by(|&i, &j| dist2(pos[i], cs[assign[i]]).partial_cmp(&dist2(pos[j], cs[assign[j]])).unwrap())
            .expect("more users than groups");
        assign[donor] = c;
    }
}

fn canonical<T: Real>(m: GroupMap<T>) -> GroupMap<T> {
    let mut order: Vec<usize> = (0..m.centroids.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (m.centroids[a], m.centroids[b]);
        ca.0.partial_cmp(&cb.0).unwrap().then(ca.1.partial_cmp(&cb.1).unwrap())
    });
    let mut relabel = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    GroupMap {
        assignment: m.assignment.iter().map(|&a| relabel[a]).collect(),
        centroids: order.iter().map(|&o| m.centroids[o]).collect(),
        d_th: m.d_th,
    }
}

/// Largest pairwise distance inside any group.
pub fn max_group_diameter<T: Real>(positions: &[(T, T)], m: &GroupMap<T>) -> T {
    let mut d = T::zero();
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if m.assignment[i] == m.assignment[j] {
                d = d.max(dist2(positions[i], positions[j]).sqrt());
            }
        }
    }
    d
}

/// Smallest `G ≤ max_groups` whose partition keeps every group within `2 d_th`;
/// `max_groups` when none does.
pub fn choose_group_count<T: Real>(positions: &[(T, T)], d_th: T, max_groups: usize, seed: u64) -> usize {
    let cap = max_groups.min(positions.len()).max(1);
    for g in 1..=cap {
        if let Ok(m) = kmeans_groups(positions, g, d_th, seed) {
            if max_group_diameter(positions, &m) <= d_th * T::lit(2.0) {
                return g;
            }
        }
    }
    cap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupingConfig<T> {
    /// Fixed group count; chosen from `d_th` when absent.
    pub groups: Option<usize>,
    pub d_th: T,
    /// Upper bound on the group count before the block-size cap applies.
    pub max_groups: usize,
    /// Seed of the k-means initialisation; the drop seed when absent.
    pub seed: Option<u64>,
}

impl<T: Real> Default for GroupingConfig<T> {
    fn default() -> Self {
        Self {
            groups: None,
            d_th: T::lit(2.0),
            max_groups: 8,
            seed: None,
        }
    }
}

/// Largest group count (at most 64) whose alignment block over `l` transmitters fits in
/// `slot_cap` slots.
pub fn max_feasible_groups(l: usize, slot_cap: u64) -> usize {
    if l < 2 {
        return 1;
    }
    let mut g = 1;
    while g < 64 {
        let Ok(d) = crate::bia::block_dimensions(l, g + 1) else { break };
        if d.slots > slot_cap as u128 {
            break;
        }
        g += 1;
    }
    g
}

/// Partitions users per `cfg`, respecting the block-size cap.
pub fn form_groups<T: Real>(positions: &[(T, T)], l: usize, cfg: &GroupingConfig<T>, seed: u64) -> Result<GroupMap<T>> {
    let seed = cfg.seed.unwrap_or(seed);
    let cap = max_feasible_groups(l, crate::bia::DEFAULT_SLOT_CAP).min(cfg.max_groups.max(1));
    let g = match cfg.groups {
        Some(g) => {
            if g > cap.max(1) && l >= 2 {
                return Err(Error::config("grouping.groups", format!("{g} groups exceed the block-size cap ({cap} max)")));
            }
            g
        }
        None => choose_group_count(positions, cfg.d_th, cap, seed),
    };
    kmeans_groups(positions, g, cfg.d_th, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_user_per_group() {
        let pos = [(0.0, 0.0), (1.0, 5.0), (3.0, 2.0)];
        let m = kmeans_groups(&pos, 3, 2.0, 1).unwrap();
        let mut a = m.assignment.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2]);
        assert_eq!(m.distortion(&pos), 0.0);
    }

    #[test]
    fn too_few_users() {
        assert_eq!(
            kmeans_groups(&[(0.0, 0.0)], 2, 2.0, 0),
            Err(Error::TooFewUsers { users: 1, groups: 2 })
        );
    }

    #[test]
    fn colocated_users() {
        let pos = vec![(2.0, 2.0); 6];
        let m = kmeans_groups(&pos, 3, 2.0, 4).unwrap();
        assert!(m.members().iter().all(|g| !g.is_empty()));
        assert_eq!(m.distortion(&pos), 0.0);
    }

    #[test]
    fn canonical_labels() {
        let pos = [(7.0, 7.0), (0.5, 0.5), (7.2, 7.1), (0.4, 0.6)];
        let m = kmeans_groups(&pos, 2, 2.0, 3).unwrap();
        assert_eq!(m.assignment, vec![1, 0, 1, 0]);
    }

    #[test]
    fn group_count_rule() {
        let pos = [(1.0, 1.0), (1.5, 1.0), (7.0, 7.0), (7.5, 7.0)];
        assert_eq!(choose_group_count(&pos, 2.0, 4, 0), 2);
        assert_eq!(choose_group_count(&pos, 20.0, 4, 0), 1);
    }

    #[test]
    fn block_cap_limits_groups() {
        assert_eq!(max_feasible_groups(16, 1_000_000), 4);
        assert_eq!(max_feasible_groups(3, 1_000_000), 16);
        assert_eq!(max_feasible_groups(1, 10), 1);
    }
}
