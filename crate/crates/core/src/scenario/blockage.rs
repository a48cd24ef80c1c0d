//! Random per-link line-of-sight blockage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::channel::ChannelTensor;
use crate::scalar::Real;

/// Zeroes each `(k, l)` link independently with probability `p_b`.
///
/// Uniforms are drawn in `(k, l)` order regardless of `p_b`, so under one seed the
/// blocked set grows monotonically with `p_b`.
pub fn apply_blockage<T: Real>(tensor: &ChannelTensor<T>, p_b: f64, seed: u64) -> ChannelTensor<T> {
    let mut out = tensor.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..tensor.users {
        for l in 0..tensor.aps {
            let u: f64 = rng.random();
            if u < p_b {
                out.blocked[k * tensor.aps + l] = true;
                for m in 0..tensor.pds {
                    out.set(k, m, l, T::zero());
                }
            }
        }
    }
    out
}
