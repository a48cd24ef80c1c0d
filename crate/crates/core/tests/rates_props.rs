use biars::linalg::Matrix;
use biars::rates::*;
use proptest::prelude::*;

fn square(l: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(0.01f64..1.0, l * l).prop_map(move |v| Matrix::from_fn(l, l, |i, j| v[i * l + j]))
}

proptest! {
    #[test]
    fn spectrum_rate_equals_log_det(h in square(3), r in prop::collection::vec(0.5f64..3.0, 3), gamma in 0.0f64..50.0) {
        let r = Matrix::diag(&r);
        let spec = spectrum(&h, &r).unwrap();
        let direct = log_det_rate(gamma, &h, &r).unwrap();
        let via = rate_from_spectrum(1.0, gamma, &spec);
        prop_assert!((direct - via).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn rates_nonnegative_and_monotone(spec in prop::collection::vec(0.0f64..10.0, 1..5), g1 in 0.0f64..20.0, dg in 0.0f64..20.0, b in 0.01f64..1.0) {
        let r1 = rate_from_spectrum(b, g1, &spec);
        let r2 = rate_from_spectrum(b, g1 + dg, &spec);
        prop_assert!(r1 >= 0.0);
        prop_assert!(r2 >= r1);
        prop_assert!(rate_slope(b, g1, &spec) >= 0.0);
    }

    #[test]
    fn common_sinr_trades_against_private_power(pc in 0.0f64..4.0, pp in prop::collection::vec(0.0f64..2.0, 1..5), extra in 0.0f64..1.0, s in 1e-4f64..1.0) {
        let inp = SinrInputs::new(1.0, 1.0, s);
        let base = sinr_common(pc, &pp, &inp).unwrap();
        let mut more = pp.clone();
        more[0] += extra;
        prop_assert!(sinr_common(pc, &more, &inp).unwrap() <= base);
        prop_assert!(sinr_common(pc + extra, &pp, &inp).unwrap() >= base);
        prop_assert!(sinr_private(0, &more, &inp).unwrap() >= sinr_private(0, &pp, &inp).unwrap());
    }

    #[test]
    fn common_rate_is_min_over_members(a in prop::collection::vec(0.0f64..5.0, 2), c in prop::collection::vec(0.0f64..5.0, 2), gamma in 0.0f64..10.0) {
        let r = group_common_rate(0.5, gamma, &[&a, &c]);
        prop_assert!((r - rate_from_spectrum(0.5, gamma, &a).min(rate_from_spectrum(0.5, gamma, &c))).abs() < 1e-12);
    }
}

#[test]
fn private_sinr_oracle() {
    let inp = SinrInputs::<f64> { c: 0.05855, rho: 1.0, zeta: 1.0, wc_sq: 1.0, wp_sq: 1.0, sigma_sq: 0.01 };
    let g = sinr_private(0, &[0.2, 0.1], &inp).unwrap();
    assert!((g - 0.01171 / 0.015855).abs() < 1e-12);
    let g = sinr_common(1.0, &[0.1, 0.1], &inp).unwrap();
    assert!((g - 0.05855 / (0.2 * 0.05855 + 0.01)).abs() < 1e-12);
    assert_eq!(sinr_common(0.0, &[0.1], &inp).unwrap(), 0.0);
    let inp = SinrInputs { sigma_sq: 0.0, ..inp };
    assert!(sinr_common(1.0, &[], &inp).is_err());
}

#[test]
fn toy_block_composition() {
    let inp = SinrInputs::<f64>::new(1.0, 1.0, 1.0);
    let h1 = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let h2 = Matrix::from_rows(&[vec![0.8, 0.3], vec![0.1, 0.9]]);
    let r = Matrix::diag(&[2.0, 1.0]);
    let state = NetworkState {
        groups: vec![vec![0], vec![1]],
        spectra: vec![spectrum(&h1, &r).unwrap(), spectrum(&h2, &r).unwrap()],
        b: 1.0 / 3.0,
        inputs: inp,
        p_total: 2.0,
        power_unit: 1.0,
        overhead: 0.0,
        noise_scale: Vec::new(),
    };
    let alloc = PowerAllocation {
        p_c: vec![0.4, 0.7],
        p_p: vec![vec![0.6], vec![0.3]],
        p_g_max: vec![1.0, 1.0],
        p_p_cap: 1.0,
        p_total: 2.0,
    };
    let report = network_sum_rate(&alloc, &state);
    let a = inp.gain();
    let mut want = 0.0;
    for (h, pc, pp) in [(&h1, 0.4, 0.6), (&h2, 0.7, 0.3)] {
        let gc = a * pc / (a * pp + 1.0);
        let gp = a * pp / 1.0;
        want += (log_det_rate(gc, h, &r).unwrap() + log_det_rate(gp, h, &r).unwrap()) / 3.0;
    }
    assert!((report.r_total - want).abs() < 1e-12, "{} vs {want}", report.r_total);

    let zero = PowerAllocation { p_c: vec![0.0; 2], p_p: vec![vec![0.0]; 2], ..alloc };
    assert_eq!(network_sum_rate(&zero, &state).r_total, 0.0);

    let one = (1.0 / 3.0) * ((1.0f64 + 1.0 / 2.0) * (1.0 + 1.0)).log2();
    assert!((log_det_rate(1.0, &h1, &r).unwrap() - 3.0 * one).abs() < 1e-12);
}
