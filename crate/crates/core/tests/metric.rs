use pdflow::metric::rate_condition_scalar;
use pdflow::vector::{dot, norm_sq};
use pdflow::{
    catalog, certify, weight_w, DenseMatrix, LinearMap, MetricSchedule, SelfAdjointPsd, TauSchedule,
};
use proptest::prelude::*;

fn example_a() -> LinearMap {
    catalog("example1").unwrap().a
}

fn quad(u: &SelfAdjointPsd, x: &[f64]) -> f64 {
    dot(x, &u.apply(x))
}

proptest! {
    #[test]
    fn saturating_tau_family_is_decreasing(
        c in 0.1..3.0f64,
        initial in 0.01..0.2f64,
        extra in 0.0..0.2f64,
        t1 in 0.0..20.0f64,
        dt in 0.0..20.0f64,
        x in prop::collection::vec(-10.0..10.0f64, 2),
    ) {
        let a = example_a();
        // keep cτ‖A‖² ≤ 1 at the limit
        let limit = (initial + extra).min(0.5 / c);
        let initial = initial.min(limit);
        let tau = TauSchedule::Saturating { initial, limit };
        prop_assert!(tau.value(t1) <= tau.value(t1 + dt));
        prop_assert!(tau.sup_rate().is_finite());
        let m = MetricSchedule::tau_family(c, &a, tau).unwrap();
        let diff = quad(&m.at(t1), &x) - quad(&m.at(t1 + dt), &x);
        prop_assert!(diff >= -1e-10 * (1.0 + norm_sq(&x)));
    }

    #[test]
    fn constant_schedule_is_time_invariant(
        entries in prop::collection::vec(-1.0..1.0f64, 4),
        t in 0.0..1e4f64,
        x in prop::collection::vec(-10.0..10.0f64, 2),
    ) {
        let b = DenseMatrix::new(2, 2, entries).unwrap();
        let g = LinearMap::dense(b).gram();
        let m = MetricSchedule::constant(SelfAdjointPsd::certify(g, 1e-12).unwrap());
        prop_assert_eq!(m.at(0.0).apply(&x), m.at(t).apply(&x));
        prop_assert_eq!(m.at(t).alpha_floor(), m.at(0.0).alpha_floor());
    }

    #[test]
    fn rate_condition_never_improves_with_gamma(
        tau in 0.01..1.0f64,
        c in 0.1..3.0f64,
        l_h in 0.0..5.0f64,
        g1 in 0.0..=1.0f64,
        g2 in 0.0..=1.0f64,
    ) {
        let a = example_a();
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let m1 = MetricSchedule::tau_family(c, &a, TauSchedule::Constant(tau)).unwrap();
        let m2 = MetricSchedule::zero(2);
        let r_lo = certify(&m1, &m2, c, lo, &a, l_h, &[0.0, 1.0]).unwrap();
        let r_hi = certify(&m1, &m2, c, hi, &a, l_h, &[0.0, 1.0]).unwrap();
        prop_assert!(!r_hi.rate_condition || r_lo.rate_condition);
        prop_assert_eq!(r_lo.rate_condition, rate_condition_scalar(tau, c, lo, l_h, 2.0));
    }

    #[test]
    fn strong_condition_implies_weak(
        entries in prop::collection::vec(-1.0..1.0f64, 4),
        shift in 0.0..1.0f64,
        c in 0.1..3.0f64,
        gamma in 0.0..=1.0f64,
        l_h in 0.0..2.0f64,
    ) {
        let a = example_a();
        let b = LinearMap::dense(DenseMatrix::new(2, 2, entries).unwrap());
        let m = LinearMap::sum(vec![(1.0, b.gram()), (shift, LinearMap::identity(2))]).unwrap();
        let m1 = MetricSchedule::constant(SelfAdjointPsd::certify(m, 1e-12).unwrap());
        let r = certify(&m1, &MetricSchedule::zero(2), c, gamma, &a, l_h, &[0.0, 5.0]).unwrap();
        prop_assert!(!r.cstrong.holds || r.cweak);
        prop_assert!(r.monotone);
        prop_assert!(r.metrics_psd);
        prop_assert!(r.derivative_bounded);
    }

    #[test]
    fn tau_family_weight_x_block(
        tau in 0.01..0.5f64,
        c in 0.1..1.0f64,
        gamma in 0.0..=1.0f64,
        x in prop::collection::vec(-10.0..10.0f64, 2),
    ) {
        let a = example_a();
        let m1 = MetricSchedule::tau_family(c, &a, TauSchedule::Constant(tau)).unwrap();
        let w = weight_w(&m1, &MetricSchedule::zero(2), c, gamma, &a, 0.0).unwrap();
        let expect = norm_sq(&x) / tau - c * gamma * norm_sq(&a.apply(&x));
        let got = w.seminorm_sq(&x, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        prop_assert!((got - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
        let zy = w.seminorm_sq(&[0.0, 0.0], &x, &x).unwrap();
        prop_assert!((zy - (c + 1.0 / c) * norm_sq(&x)).abs() <= 1e-10 * (1.0 + zy));
    }
}

#[test]
fn non_monotone_step_list_is_rejected() {
    assert!(TauSchedule::Steps(vec![0.2, 0.1]).validate().is_err());
    assert!(TauSchedule::Steps(vec![0.1, 0.2]).validate().is_ok());
    assert!(TauSchedule::Constant(-1.0).validate().is_err());
}
