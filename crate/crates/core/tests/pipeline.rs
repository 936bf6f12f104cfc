use gar_core::methods::{fit_new_tail, fit_old, new_kernel, old_quantile, NewMethodConfig};
use gar_core::{
    align_horizon, expected_tail, extreme_quantile, sample_series, Design, DgpSpec, ParetoDesign, Schema, TailSide,
};
use proptest::prelude::*;

#[test]
fn csv_round_trip_preserves_series() {
    let ds = sample_series(&DgpSpec::quarter_ahead(), 60, 1, 3).unwrap();
    let mut buf = Vec::new();
    ds.write_to(&mut buf).unwrap();
    let back = gar_core::data::read_dataset(buf.as_slice(), &Schema::default()).unwrap();
    assert_eq!(back.timestamps, ds.timestamps);
    assert_eq!(back.covariate_names, ds.covariate_names);
    for (a, b) in back.y.iter().zip(&ds.y) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn upper_quantile_tracks_pareto_truth() {
    let design = ParetoDesign::constant(3.0);
    let pairs = design.sample_pairs(4000, 17).unwrap();
    let cfg = NewMethodConfig::default();
    let kernel = new_kernel(&pairs, &cfg).unwrap();
    let fit = fit_new_tail(&pairs, TailSide::Upper, &cfg).unwrap();
    assert!((fit.exponent_at(&[0.0]).unwrap() - 3.0).abs() < 0.6);

    let tau = 0.99;
    let q = extreme_quantile(&fit, &pairs, &[0.0], tau, &kernel).unwrap();
    let truth = design.true_quantile(&[0.0], tau).unwrap();
    assert!((q.estimate - truth).abs() / truth < 0.25, "{} vs {truth}", q.estimate);
    assert!(q.se > 0.0);

    let e = expected_tail(&fit, &q, &[0.0]).unwrap();
    assert!(e.estimate > q.estimate);
    assert!(!e.near_nonexistence);
}

#[test]
fn both_methods_order_lower_and_upper_tails() {
    let ds = sample_series(&DgpSpec::quarter_ahead(), 500, 1, 8).unwrap();
    let pairs = align_horizon(&ds, 1).unwrap();
    let x0 = pairs.covariate_means();
    let cfg = NewMethodConfig::default();
    let kernel = new_kernel(&pairs, &cfg).unwrap();
    let lower = fit_new_tail(&pairs, TailSide::Lower, &cfg).unwrap();
    let upper = fit_new_tail(&pairs, TailSide::Upper, &cfg).unwrap();
    let q_lo = extreme_quantile(&lower, &pairs, &x0, 0.01, &kernel).unwrap().estimate;
    let q_hi = extreme_quantile(&upper, &pairs, &x0, 0.99, &kernel).unwrap().estimate;
    assert!(q_lo < lower.threshold && q_hi > upper.threshold);

    let theta = fit_old(&pairs, &x0).unwrap();
    let o_lo = old_quantile(&theta, 0.01).unwrap();
    let o_hi = old_quantile(&theta, 0.99).unwrap();
    assert!(o_lo < o_hi);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn upper_quantiles_increase_with_level(seed in 0u64..1000, a in 0.990f64..0.995, gap in 0.001f64..0.004) {
        let pairs = ParetoDesign::constant(3.0).sample_pairs(800, seed).unwrap();
        let cfg = NewMethodConfig::default();
        let kernel = new_kernel(&pairs, &cfg).unwrap();
        let fit = fit_new_tail(&pairs, TailSide::Upper, &cfg).unwrap();
        let q1 = extreme_quantile(&fit, &pairs, &[0.0], a, &kernel).unwrap();
        let q2 = extreme_quantile(&fit, &pairs, &[0.0], a + gap, &kernel).unwrap();
        prop_assert!(q2.estimate > q1.estimate);
        prop_assert!(q2.se > q1.se);
    }
}
