use pdflow::flow::uniform_grid;
use pdflow::problem::{CATALOG_NAMES, EXAMPLE1_X0, EXAMPLE1_Y0};
use pdflow::vector::{dist, norm, sub};
use pdflow::{
    catalog, ergodic, integrate, lyapunov, operator_norm, run, DiscreteParams, FlowParams,
    FlowSystem, Integrator, MetricMode, SystemState, TauSchedule,
};
use proptest::prelude::*;

fn state(p: &pdflow::ProblemSpec, v: &[f64]) -> SystemState {
    let (n, m) = (p.n(), p.m());
    SystemState::new(v[..n].to_vec(), v[n..n + m].to_vec(), v[n + m..n + 2 * m].to_vec())
}

fn example_start(p: &pdflow::ProblemSpec) -> SystemState {
    SystemState::with_split_default(p, EXAMPLE1_X0.to_vec(), EXAMPLE1_Y0.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn third_line_consistency(
        name in prop::sample::select(CATALOG_NAMES.to_vec()),
        raw in prop::collection::vec(-20.0..20.0f64, 24),
        gamma in 0.0..=1.0f64,
        c in 0.2..3.0f64,
        frac in 0.1..1.0f64,
    ) {
        let p = catalog(name).unwrap();
        let a2 = operator_norm(&p.a, 1e-12, 10_000).unwrap().value.powi(2);
        let tau = frac / (c * a2);
        let sys = FlowSystem::new(&p, c, gamma, &MetricMode::closed_form(tau)).unwrap();
        let s = state(&p, &raw);
        let vel = sys.rhs(&s).unwrap();
        let xu: Vec<f64> = s.x.iter().zip(&vel.u).map(|(a, b)| a + b).collect();
        let zv: Vec<f64> = s.z.iter().zip(&vel.v).map(|(a, b)| a + b).collect();
        let expect: Vec<f64> = sub(&p.a.apply(&xu), &zv).iter().map(|r| c * r).collect();
        prop_assert!(dist(&vel.w, &expect) <= 1e-14 * (1.0 + norm(&expect)) * 10.0);
    }

    #[test]
    fn closed_form_and_general_metric_agree(
        raw in prop::collection::vec(-20.0..20.0f64, 6),
        gamma in 0.0..=1.0f64,
        tau_c in 0.05..0.49f64,
    ) {
        let p = catalog("example1").unwrap();
        let s = state(&p, &raw);
        let closed = FlowSystem::new(&p, 1.0, gamma, &MetricMode::closed_form(tau_c)).unwrap();
        let mode = MetricMode::general_tau_family(1.0, &p.a, TauSchedule::Constant(tau_c)).unwrap();
        let general = FlowSystem::new(&p, 1.0, gamma, &mode).unwrap();
        let (a, b) = (closed.rhs(&s).unwrap(), general.rhs(&s).unwrap());
        let scale = 1.0 + a.norm();
        prop_assert!(dist(&a.u, &b.u) <= 1e-8 * scale);
        prop_assert!(dist(&a.v, &b.v) <= 1e-8 * scale);
        prop_assert!(dist(&a.w, &b.w) <= 1e-8 * scale);
    }

    #[test]
    fn euler_step_one_is_admm(
        raw in prop::collection::vec(-20.0..20.0f64, 6),
        gamma in 0.0..=1.0f64,
        tau_c in 0.02..0.12f64,
    ) {
        let p = catalog("example1").unwrap();
        let s0 = state(&p, &raw);
        let params = FlowParams {
            c: 1.0,
            gamma,
            mode: MetricMode::closed_form(tau_c),
            integrator: Integrator::Euler { step: 1.0 },
            horizon: 20.0,
        };
        let grid: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let traj = integrate(&p, &params, &s0, &grid).unwrap();
        let d = DiscreteParams::closed_form(1.0, gamma, tau_c, 20, 0.0);
        let iters = run(&p, &d, &s0).unwrap();
        prop_assert_eq!(traj.states.len(), iters.history.len());
        for (a, b) in traj.states.iter().zip(&iters.history) {
            let scale = 1.0 + norm(&b.state.x) + norm(&b.state.z) + norm(&b.state.y);
            let err = dist(&a.x, &b.state.x) + dist(&a.z, &b.state.z) + dist(&a.y, &b.state.y);
            prop_assert!(err <= 1e-12 * scale, "err {err}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lyapunov_descends_and_ergodic_identity_holds(
        x0 in prop::collection::vec(-10.0..10.0f64, 2),
        y0 in prop::collection::vec(-10.0..10.0f64, 2),
        gamma in 0.0..=1.0f64,
        tau_c in 0.05..0.49f64,
    ) {
        let p = catalog("example1").unwrap();
        let s0 = SystemState::with_split_default(&p, x0, y0);
        let params = FlowParams::closed_form(1.0, gamma, tau_c, 20.0);
        let sys = FlowSystem::from_params(&p, &params).unwrap();
        let traj = sys.integrate(&s0, params.integrator, 20.0, &uniform_grid(20.0, 0.1)).unwrap();
        let mut prev = f64::INFINITY;
        for s in &traj.states {
            let v = lyapunov(&p, sys.m1(), sys.m2(), 1.0, gamma, s).unwrap();
            prop_assert!(v <= prev + 1e-6 * (1.0 + prev));
            prev = v;
        }
        for (s, acc) in traj.states.iter().zip(&traj.ergodic).skip(1) {
            let (xt, zt) = ergodic(acc, s).unwrap();
            let lhs = norm(&sub(&p.a.apply(&xt), &zt));
            let rhs = dist(&s.y, &s0.y) / s.t;
            prop_assert!((lhs - rhs).abs() <= 1e-8);
        }
    }
}

#[test]
fn velocity_decays_at_the_horizon() {
    let p = catalog("example1").unwrap();
    let s0 = example_start(&p);
    for tau_c in [0.49, 0.25, 0.1] {
        for gamma in [0.99, 0.5, 0.01] {
            let params = FlowParams::closed_form(1.0, gamma, tau_c, 200.0);
            let sys = FlowSystem::from_params(&p, &params).unwrap();
            let traj = sys.integrate(&s0, params.integrator, 200.0, &[]).unwrap();
            let end = traj.last().unwrap();
            assert!((end.t - 200.0).abs() < 1e-9);
            let speed = sys.velocity_norm(end).unwrap();
            assert!(speed <= 1e-4, "tau_c={tau_c} gamma={gamma}: {speed}");
        }
    }
}

#[test]
fn saddle_point_stays_fixed() {
    for name in CATALOG_NAMES {
        let p = catalog(name).unwrap();
        let a2 = operator_norm(&p.a, 1e-12, 10_000).unwrap().value.powi(2);
        let params = FlowParams::closed_form(1.0, 0.5, 0.9 / a2, 10.0);
        let s0 = SystemState::saddle(&p).unwrap();
        let traj = integrate(&p, &params, &s0, &[]).unwrap();
        let end = traj.last().unwrap();
        let moved = dist(&end.x, &s0.x) + dist(&end.z, &s0.z) + dist(&end.y, &s0.y);
        assert!(moved <= 1e-10, "{name}: {moved}");
    }
}

#[test]
fn integration_is_deterministic() {
    let p = catalog("example1").unwrap();
    let s0 = example_start(&p);
    let params = FlowParams::closed_form(1.0, 0.5, 0.25, 30.0);
    let grid = uniform_grid(30.0, 0.5);
    let a = integrate(&p, &params, &s0, &grid).unwrap();
    let b = integrate(&p, &params, &s0, &grid).unwrap();
    assert_eq!(a.states, b.states);
    assert_eq!(a.steps, b.steps);
}

#[test]
fn general_metric_converges_on_lasso() {
    let p = catalog("lasso-small").unwrap();
    let (xs, _, ys) = p.saddle_point().unwrap();
    let l_h = p.lipschitz_h();
    // τ(L_h/4 + c(3+γ)/4‖A‖²) ≤ 1 with A = I
    let tau = 0.9 / (l_h / 4.0 + 1.0);
    let mode = MetricMode::general_tau_family(1.0, &p.a, TauSchedule::Constant(tau)).unwrap();
    let params = FlowParams {
        c: 1.0,
        gamma: 1.0,
        mode,
        integrator: Integrator::Rk4 { step: 0.05 },
        horizon: 200.0,
    };
    let s0 = SystemState::with_split_default(&p, vec![0.0; p.n()], vec![0.0; p.m()]);
    let traj = integrate(&p, &params, &s0, &[]).unwrap();
    let end = traj.last().unwrap();
    assert!(dist(&end.x, &xs) <= 1e-4, "{:?}", end.x);
    assert!(dist(&end.y, &ys) <= 1e-4, "{:?}", end.y);
}
