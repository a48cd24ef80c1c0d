use biars::bia::*;
use biars::linalg::Matrix;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_modes(users: usize, l: usize, rng: &mut ChaCha8Rng) -> Vec<Matrix<f64>> {
    (0..users).map(|_| Matrix::from_fn(l, l, |_, _| rng.random_range(0.05..1.0))).collect()
}

fn stacked(blocks: &[&[[f64; 2]; 2]]) -> Matrix<f64> {
    let rows: Vec<Vec<f64>> = blocks.iter().flat_map(|b| b.iter().map(|r| r.to_vec())).collect();
    Matrix::from_rows(&rows)
}

#[test]
fn toy_block_precoders_exact() {
    let b = build_group_precoders(2, 2, DEFAULT_SLOT_CAP).unwrap();
    let i2 = [[1.0, 0.0], [0.0, 1.0]];
    let o2 = [[0.0, 0.0], [0.0, 0.0]];
    assert_eq!(b.dims.slots, 3);
    assert_eq!(b.dims.ab_per_group, 1);
    assert_eq!(b.precoders[0].dense::<f64>(2, 3), stacked(&[&i2, &i2, &o2]));
    assert_eq!(b.precoders[1].dense::<f64>(2, 3), stacked(&[&i2, &o2, &i2]));
    assert_eq!(alignment_ratio(2, 2).unwrap(), num_rational::Ratio::new(1, 3));
    let n = intergroup_cancel(0, &b, 0.7);
    assert_eq!(n.covariance(0), Matrix::diag(&[1.4, 0.7]));
    let n = intergroup_cancel(1, &b, 0.7);
    assert_eq!(n.covariance(0), Matrix::diag(&[1.4, 0.7]));
}

#[test]
fn slot_counts_match_big_integer_closed_form() {
    for l in 2..=16usize {
        for g in 1..=5usize {
            let d = block_dimensions(l, g).unwrap();
            let base = BigUint::from(l - 1);
            let slots = base.pow(g as u32) + BigUint::from(g) * base.pow(g as u32 - 1);
            assert_eq!(BigUint::from(d.slots), slots, "L={l} G={g}");
            assert_eq!(BigUint::from(d.ab_per_group), base.pow(g as u32 - 1));
        }
    }
}

#[test]
fn every_slot_schedule_is_consistent() {
    for (l, g) in [(2, 2), (3, 2), (3, 3), (4, 2), (4, 3)] {
        let b = build_group_precoders(l, g, DEFAULT_SLOT_CAP).unwrap();
        let ab = b.dims.ab_per_group as usize;
        for p in &b.precoders {
            assert_eq!(p.alignment_blocks.len(), ab);
            for blk in &p.alignment_blocks {
                let mut modes: Vec<usize> = blk.iter().map(|&s| b.schedule.modes[p.group][s]).collect();
                modes.sort_unstable();
                assert_eq!(modes, (0..l).collect::<Vec<_>>());
            }
        }
        let served: usize = b.schedule.active.iter().map(Vec::len).sum();
        assert_eq!(served, g * ab * l);
    }
}

#[test]
fn decodability_over_random_channels() {
    for l in 2..=4 {
        for g in 2..=3 {
            let b = build_group_precoders(l, g, DEFAULT_SLOT_CAP).unwrap();
            for seed in 0..100 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let modes = random_modes(2 * g, l, &mut rng);
                let group_of: Vec<usize> = (0..2 * g).map(|k| k % g).collect();
                let rep = verify_decodability(&b, &modes, &group_of);
                assert!(rep.passed(), "L={l} G={g} seed={seed}: {:?}", rep.violations);
                assert_eq!(rep.checked_blocks, 2 * g * b.dims.ab_per_group as usize);
            }
        }
    }
}

#[test]
fn noiseless_round_trip() {
    for (l, g) in [(2, 2), (3, 2), (4, 3)] {
        let b = build_group_precoders(l, g, DEFAULT_SLOT_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let modes = random_modes(g, l, &mut rng);
        let group_of: Vec<usize> = (0..g).collect();
        let ab = b.dims.ab_per_group as usize;
        let symbols: Vec<Vec<Vec<f64>>> = (0..g)
            .map(|_| (0..ab).map(|_| (0..l).map(|_| rng.sample(StandardNormal)).collect()).collect())
            .collect();
        let y = transmit(&b, &modes, &group_of, &symbols, 0.0, &mut rng);
        for k in 0..g {
            let got = decode_user(&b, &modes[k], k, &y[k]).unwrap();
            for (blk, want) in got.iter().zip(&symbols[k]) {
                let err: f64 = blk.iter().zip(want).map(|(a, w)| (a - w).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = want.iter().map(|w| w * w).sum::<f64>().sqrt();
                assert!(err <= 1e-10 * norm, "L={l} G={g} user {k}: {err}");
            }
        }
    }
}

#[test]
fn cleaned_noise_covariance_monte_carlo() {
    let b = build_group_precoders(3, 2, DEFAULT_SLOT_CAP).unwrap();
    let sigma_sq: f64 = 0.5;
    let expected = intergroup_cancel(0, &b, sigma_sq);
    assert_eq!(expected.blocks, vec![vec![1.0, 1.0, 0.5]; 2]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 1_000_000;
    let slots = b.schedule.slots();
    let mut acc = vec![[[0.0f64; 3]; 3]; 2];
    let mut noise = vec![0.0; slots];
    for _ in 0..draws {
        for z in noise.iter_mut() {
            *z = sigma_sq.sqrt() * rng.sample::<f64, _>(StandardNormal);
        }
        for (blk, a) in acc.iter_mut().enumerate() {
            let y = clean_block(&b, 0, blk, &noise);
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] += y[i] * y[j];
                }
            }
        }
    }
    for (blk, a) in acc.iter().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                let est = a[i][j] / draws as f64;
                if i == j {
                    let want = expected.blocks[blk][i];
                    assert!((est - want).abs() <= 0.01 * want, "block {blk} ({i},{i}): {est} vs {want}");
                } else {
                    assert!(est.abs() <= 0.01 * sigma_sq, "block {blk} ({i},{j}): {est}");
                }
            }
        }
    }
}

#[test]
fn single_group_has_no_enhancement() {
    let b = build_group_precoders(2, 1, DEFAULT_SLOT_CAP).unwrap();
    assert_eq!(intergroup_cancel(0, &b, 1.0).covariance(0), Matrix::diag(&[1.0, 1.0]));
    assert_eq!(noise_multiplicities::<f64>(2, 1), vec![1.0, 1.0]);
    assert_eq!(noise_multiplicities::<f64>(3, 2), vec![2.0, 2.0, 1.0]);
}

#[test]
fn duplicate_modes_rejected() {
    let b = build_group_precoders(2, 2, DEFAULT_SLOT_CAP).unwrap();
    let h = Matrix::from_rows(&[vec![0.3, 0.7], vec![0.3, 0.7]]);
    let good = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]);
    let rep = verify_decodability(&b, &[h, good], &[0, 1]);
    assert!(!rep.passed());
    assert_eq!(rep.violations.len(), 1);
    assert_eq!(rep.violations[0].user, 0);
}
