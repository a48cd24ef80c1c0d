use biars::baselines::SchemeId;
use biars::experiments::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(kind: ExperimentKind, axis: Axis, values: Vec<f64>, schemes: Vec<SchemeId>, drops: usize) -> ExperimentSpec {
    ExperimentSpec {
        name: "t".into(),
        kind,
        schemes,
        axis,
        values,
        drops,
        seed: Some(21),
        snr_db: Some(30.0),
        users: Some(6),
        blockage_p: 0.0,
        pam_order: 2,
        symbol_cap: 20_000,
    }
}

#[test]
fn sweeps_are_deterministic_across_thread_counts() {
    let ctx = ExperimentContext::reference(1);
    let s = spec(ExperimentKind::SumRate, Axis::SnrDb, vec![10.0, 20.0], vec![SchemeId::BiaRsOpt, SchemeId::Rs], 3);
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let a = pool(1).install(|| run_experiment(&ctx, &s)).unwrap().to_csv().unwrap();
    let b = pool(4).install(|| run_experiment(&ctx, &s)).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("scheme,axis,metric,mean,stderr,drops\n"));
}

#[test]
fn stderr_shrinks_with_drops() {
    let ctx = ExperimentContext::reference(1);
    let se: Vec<f64> = [10, 40, 160]
        .iter()
        .map(|&d| {
            let s = spec(ExperimentKind::SumRate, Axis::SnrDb, vec![30.0], vec![SchemeId::Baseline1], d);
            run_sweep(&ctx, &s).unwrap().get("baseline1", 30.0, "sum_rate").unwrap().stderr
        })
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 2.0 - 1.0).abs() <= 0.25, "{se:?}");
    }
}

#[test]
fn awgn_ber_within_three_sigma() {
    for (i, db) in [4.0f64, 6.0, 8.0, 10.0, 12.0, 14.0].into_iter().enumerate() {
        let gamma = 10f64.powf(db / 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let c = pam_ber_monte_carlo(2, gamma, 10_000_000, &mut rng);
        let p = q_function(gamma.sqrt());
        assert_eq!(pam_ber_analytic(2, gamma), p);
        let sigma = (p * (1.0 - p) / c.bits as f64).sqrt();
        assert!((c.ber() - p).abs() <= 3.0 * sigma, "{db} dB: {} vs {p}", c.ber());
    }
}

#[test]
fn trace_starts_at_uniform_split() {
    let ctx = ExperimentContext::reference(1);
    let s = spec(
        ExperimentKind::Convergence,
        Axis::Iterations,
        vec![0.0, 1.0, 5.0],
        vec![SchemeId::BiaRsOpt, SchemeId::BiaRsSubopt, SchemeId::Baseline1],
        2,
    );
    let t = run_convergence_trace(&ctx, &s).unwrap();
    let b1 = t.get("baseline1", 0.0, "sum_rate").unwrap().mean;
    assert_eq!(t.get("bia-rs-opt", 0.0, "sum_rate").unwrap().mean, b1);
    assert_eq!(t.get("bia-rs-subopt", 0.0, "sum_rate").unwrap().mean, b1);
    let best = t.series("bia-rs-opt", "best_sum_rate");
    assert!(best.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn ber_table_has_awgn_row_and_rejects_rate_only_kind() {
    let ctx = ExperimentContext::reference(1);
    let mut s = spec(ExperimentKind::Ber, Axis::SnrDb, vec![6.0, 12.0], vec![SchemeId::Bia], 1);
    let t = run_ber(&ctx, &s).unwrap();
    assert_eq!(t.get("awgn", 6.0, "ber_analytic").unwrap().mean, pam_ber_analytic(2, 10f64.powf(0.6)));
    assert!(t.get("bia", 12.0, "ber").is_some());
    s.kind = ExperimentKind::SumRate;
    assert!(run_ber(&ctx, &s).is_err());
}
